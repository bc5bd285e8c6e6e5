import os

import numpy as np
from setuptools import setup
from setuptools.extension import Extension

# The compiled kernels are optional; the package falls back to numpy.
ext_modules = []
if not os.environ.get("WAVEGCN_NO_EXT"):
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [Extension("wavegcn._ckernels", ["src/wavegcn/_ckernels.pyx"],
                       include_dirs=[np.get_include()])],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
