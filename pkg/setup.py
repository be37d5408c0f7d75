"""Build script: compiles the Cython kernel module when a compiler is available.

A failed compile is not fatal. The package falls back to the pure numpy
kernels at import time, so source-only installs still work.
"""

import numpy
from setuptools import setup
from setuptools.extension import Extension

ext_modules = []
try:
    from Cython.Build import cythonize

    ext = Extension(
        "spotcheck._kernels",
        sources=["src/spotcheck/_kernels.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3"],
    )
    ext_modules = cythonize([ext], language_level="3")
except ImportError:
    pass

setup(ext_modules=ext_modules)
