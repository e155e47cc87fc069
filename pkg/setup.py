"""Build script for the compiled inner-loop kernels.

The package is fully functional without the extension (a pure-numpy
implementation of the same kernels is selected at import time when the
extension is absent), so the build degrades gracefully if Cython is not
available.
"""
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [Extension("midasvi._kernels", ["src/midasvi/_kernels.pyx"])],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "initializedcheck": False,
        },
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
