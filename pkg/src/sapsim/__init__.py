"""1D triple-well adiabatic matter-wave transport simulator."""

__version__ = "0.1.0"
