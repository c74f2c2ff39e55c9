"""Builds the optional compiled kernel extension.

The package is fully functional without it: ``mpmcts.kernels`` falls back to
the pure-Python backend when the extension is absent.  Set MPMCTS_SKIP_EXT=1
to skip the build explicitly.
"""

import os

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("MPMCTS_SKIP_EXT"):
    try:
        from Cython.Build import cythonize

        # No -ffast-math: the compiled backend must match the pure-Python
        # backend bit for bit (IEEE double semantics).
        ext_modules = cythonize(
            [Extension("mpmcts._ckernels", ["src/mpmcts/_ckernels.pyx"])],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
