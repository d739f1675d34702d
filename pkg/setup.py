import os

from setuptools import setup
from setuptools.extension import Extension

# The compiled kernel is an optimisation, not a requirement: if Cython or a C
# compiler is missing the package installs anyway and falls back to the pure
# Python kernels at import time.
ext_modules = []
if os.environ.get("CUBEMEDIAN_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [Extension("cubemedian._fastkernels", ["src/cubemedian/_fastkernels.pyx"])],
            language_level=3,
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
