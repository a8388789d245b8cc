"""Run configuration: nested YAML blocks with validated defaults.

The file mirrors the module parameter surfaces; every default is
materialized into the resolved config so an output directory always
carries the exact parameters that produced it (t_d in particular is
stored as a fraction of t_p and resolved at load).
"""

from __future__ import annotations

import copy
from dataclasses import asdict, dataclass, field
from pathlib import Path

import yaml

from .grid import ConfigurationError, Grid, make_grid
from .potential import PotentialParams
from .propagator import PropagationConfig
from .bohm import TrajectoryConfig

__all__ = ["RunConfig", "load_config", "apply_overrides"]

_DEFAULTS = {
    "grid": {"x_min": -12.0, "x_max": 12.0, "n_points": 2048},
    "potential": {
        "v_min": 5.0,
        "v_max": 1000.0,
        "sigma": 0.16,
        "x0": 0.48,
        "t_p": 5000.0,
        "t_d_fraction": 0.15,
    },
    "dynamics": {"dt": 5e-4, "g": 0.0, "snapshot_stride": 100, "velocity_stride": 10},
    "trajectories": {
        "n_traj": 1000,
        "rtol": 1e-6,
        "atol": 1e-6,
        "density_floor": 1e-12,
        "dt_min": 1e-12,
        "history_stride": 10,
    },
    "analysis": {
        "smooth_window": 11,
        "sweep_t_p": [1000.0, 2000.0, 3000.0, 4000.0, 5000.0],
        "sweep_g": [0.0, 0.2, 0.5],
    },
    "output": {"directory": "runs", "dump_frames": False},
}

_NUMERIC_KEYS = {"x_min", "x_max", "v_min", "v_max", "sigma", "x0", "t_p",
                 "t_d_fraction", "dt", "g", "rtol", "atol", "density_floor",
                 "dt_min", "smooth_window"}


@dataclass
class RunConfig:
    raw: dict = field(default_factory=lambda: copy.deepcopy(_DEFAULTS))

    # -- block accessors --------------------------------------------------

    @property
    def resolved(self) -> dict:
        out = copy.deepcopy(self.raw)
        pot = out["potential"]
        pot["t_d"] = pot["t_d_fraction"] * pot["t_p"]
        return out

    def make_grid(self) -> Grid:
        g = self.raw["grid"]
        return make_grid(g["x_min"], g["x_max"], int(g["n_points"]))

    def potential_params(self) -> PotentialParams:
        p = self.raw["potential"]
        return PotentialParams(
            v_min=p["v_min"],
            v_max=p["v_max"],
            sigma=p["sigma"],
            x0=p["x0"],
            t_p=p["t_p"],
            t_d=p["t_d_fraction"] * p["t_p"],
        )

    def propagation_config(self, t_start: float = 0.0, t_end: float | None = None) -> PropagationConfig:
        d = self.raw["dynamics"]
        p = self.potential_params()
        return PropagationConfig(
            dt=d["dt"],
            t_start=t_start,
            t_end=p.total_time if t_end is None else t_end,
            snapshot_stride=int(d["snapshot_stride"]),
            velocity_stride=int(d["velocity_stride"]),
            g=d["g"],
        )

    def trajectory_config(self) -> TrajectoryConfig:
        t = self.raw["trajectories"]
        return TrajectoryConfig(
            n_traj=int(t["n_traj"]),
            rtol=t["rtol"],
            atol=t["atol"],
            density_floor=t["density_floor"],
            dt_min=t["dt_min"],
        )

    def with_updates(self, **section_values) -> "RunConfig":
        """New config with {"section.key": value} style updates."""
        raw = copy.deepcopy(self.raw)
        for dotted, value in section_values.items():
            section, key = dotted.split(".", 1)
            if section not in raw or key not in raw[section]:
                raise ConfigurationError(f"unknown config key {dotted!r}")
            raw[section][key] = value
        cfg = RunConfig(raw)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        self.make_grid()
        self.potential_params()
        self.propagation_config().validate_against(self.potential_params())
        self.trajectory_config()
        if self.raw["trajectories"]["n_traj"] < 2:
            raise ConfigurationError("trajectories.n_traj must be >= 2")

    def dump(self, path: Path) -> None:
        path.write_text(yaml.safe_dump(self.resolved, sort_keys=True))


def load_config(path: str | Path | None = None) -> RunConfig:
    raw = copy.deepcopy(_DEFAULTS)
    if path is not None:
        data = yaml.safe_load(Path(path).read_text()) or {}
        if not isinstance(data, dict):
            raise ConfigurationError(f"config root must be a mapping: {path}")
        for section, values in data.items():
            if section not in raw:
                raise ConfigurationError(f"unknown config section {section!r}")
            if not isinstance(values, dict):
                raise ConfigurationError(f"section {section!r} must be a mapping")
            for key, val in values.items():
                if key not in raw[section]:
                    raise ConfigurationError(f"unknown config key {section}.{key}")
                raw[section][key] = val
    cfg = RunConfig(raw)
    cfg.validate()
    return cfg


def apply_overrides(cfg: RunConfig, overrides: list[str]) -> RunConfig:
    """Apply CLI --override entries of the form section.key=value."""
    updates = {}
    for item in overrides:
        if "=" not in item:
            raise ConfigurationError(f"override {item!r} is not key=value")
        dotted, text = item.split("=", 1)
        key = dotted.split(".")[-1]
        if key in _NUMERIC_KEYS:
            value = float(text)
        elif key in {"n_points", "snapshot_stride", "velocity_stride", "n_traj",
                     "history_stride"}:
            value = int(text)
        elif key in {"dump_frames"}:
            value = text.lower() in {"1", "true", "yes"}
        elif key in {"sweep_t_p", "sweep_g"}:
            value = [float(v) for v in text.split(",") if v]
        else:
            value = text
        updates[dotted] = value
    return cfg.with_updates(**updates)
