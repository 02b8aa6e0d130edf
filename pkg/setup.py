"""Builds the optional compiled contraction kernel.

The package is fully functional without the extension: traceshift._contract
falls back to the NumPy implementation when traceshift._kernels is missing.
Set TRACESHIFT_NO_EXT=1 to skip the extension build entirely.
"""

import os

from setuptools import setup

ext_modules = []
if os.environ.get("TRACESHIFT_NO_EXT") != "1":
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "traceshift._kernels",
                    ["src/traceshift/_kernels.pyx"],
                    include_dirs=[numpy.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            language_level=3,
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
