import pybind11
from setuptools import Extension, setup

setup(
    ext_modules=[
        Extension(
            "sapsim._stepkern",
            sources=["src/sapsim/_stepkern.cpp"],
            include_dirs=[pybind11.get_include()],
            libraries=["fftw3"],
            extra_compile_args=["-O3", "-std=c++17", "-march=native", "-ffast-math"],
        )
    ]
)
