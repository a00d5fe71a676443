import os

import numpy
from setuptools import setup

ext_modules = []
if not os.environ.get("EWENS_PITMAN_NO_EXT"):
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            "src/ewens_pitman/_ckernels.pyx",
            compiler_directives={"language_level": "3"},
        )
        for ext in ext_modules:
            ext.include_dirs.append(numpy.get_include())
            ext.extra_compile_args.append("-O3")

setup(ext_modules=ext_modules)
