"""Build script: compiles the optional C kernel extension.

The package works without the extension (a pure-Python backend is selected
at import time), so a failed compilation only costs speed.  Set
GAPCERT_NO_EXTENSION=1 to skip the build entirely.
"""

import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("GAPCERT_NO_EXTENSION") != "1":
    try:
        import numpy
        from Cython.Build import cythonize

        ext = Extension(
            "gapcert._kernels._ckernels",
            ["src/gapcert/_kernels/_ckernels.pyx"],
            include_dirs=[numpy.get_include()],
            # -ffp-contract=off: the interval kernels rely on each float
            # operation rounding individually; fused multiply-adds would
            # change results and break bit-parity with the pure backend.
            extra_compile_args=["-O3", "-ffp-contract=off"],
            define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        )
        ext_modules = cythonize([ext], language_level="3")
    except Exception as exc:  # pragma: no cover - build-environment dependent
        print(f"gapcert: compiled kernels unavailable, using pure backend ({exc})")

setup(ext_modules=ext_modules)
