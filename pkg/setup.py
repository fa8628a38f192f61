"""Build script: compiles the simplex pivot kernel when Cython is available.

The package works without the extension (a numpy fallback is selected at
import time), so a missing compiler or Cython only costs speed.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

ext_modules = []
if cythonize is not None:
    ext_modules = cythonize(
        [
            Extension(
                "cutrank._speedups",
                ["src/cutrank/_speedups.pyx"],
                # -ffp-contract=off keeps mul/sub unfused so the compiled
                # kernel matches the numpy fallback bit for bit.
                extra_compile_args=["-O2", "-ffp-contract=off"],
            )
        ],
        language_level=3,
    )

setup(ext_modules=ext_modules)
