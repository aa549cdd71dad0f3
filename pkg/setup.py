"""Build script: compiles the optional fast-kernel extension.

The package is fully functional without the extension (a pure-Python/numpy
fallback is selected at import time), so a missing compiler or Cython only
degrades speed, never correctness. Set FLOORREF_SKIP_EXT=1 to force a
pure-Python build.
"""

import os

from setuptools import setup

ext_modules = []
if not os.environ.get("FLOORREF_SKIP_EXT"):
    try:
        import numpy
        from Cython.Build import cythonize

        ext_modules = cythonize(
            ["src/floorref/_kernels/_core.pyx"],
            compiler_directives={"language_level": "3"},
        )
        for ext in ext_modules:
            ext.include_dirs.append(numpy.get_include())
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
