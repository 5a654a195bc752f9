"""Builds the optional compiled evaluator kernel; the package works without it."""

import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("STEEPLE_NO_EXTENSION", "") in ("", "0"):
    try:
        from Cython.Build import cythonize
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [Extension("steeple._ceval", ["src/steeple/_ceval.pyx"])],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
