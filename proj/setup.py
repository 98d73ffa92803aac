"""Builds the compiled core as augairl._augairl."""

import glob
import subprocess

from pybind11.setup_helpers import Pybind11Extension, build_ext
from setuptools import setup


def eigen_include():
    try:
        out = subprocess.run(
            ["pkg-config", "--cflags-only-I", "eigen3"],
            capture_output=True, text=True, check=True,
        ).stdout
        for flag in out.split():
            if flag.startswith("-I"):
                return flag[2:]
    except (OSError, subprocess.CalledProcessError):
        pass
    return "/usr/include/eigen3"


ext = Pybind11Extension(
    "augairl._augairl",
    sorted(glob.glob("src/*.cpp")) + ["bindings/pybind_module.cpp"],
    include_dirs=["include", "vendor", eigen_include()],
    cxx_std=20,
    extra_compile_args=["-O3", "-march=native"],
)

setup(ext_modules=[ext], cmdclass={"build_ext": build_ext})
