"""Build script for the optional compiled perception kernels.

The package works without the extension (a NumPy fallback is selected at
import time), so a failed compile only costs speed, never functionality.
"""

import os

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

ext_modules = []
if cythonize is not None and os.path.exists("src/tpik/perception/_kernels.pyx"):
    extensions = [
        Extension(
            "tpik.perception._kernels",
            ["src/tpik/perception/_kernels.pyx"],
            include_dirs=[np.get_include()],
            # -ffp-contract=off keeps the compiled kernels bit-compatible
            # with the NumPy fallback (no FMA contraction).
            extra_compile_args=["-O3", "-ffp-contract=off"],
            define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        )
    ]
    ext_modules = cythonize(extensions, compiler_directives={"language_level": "3"})

setup(ext_modules=ext_modules)
