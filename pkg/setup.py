import os

import numpy as np
from setuptools import setup

ext_modules = []
if os.environ.get("PATHSPACE_NO_EXT", "") in ("", "0"):
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        from setuptools import Extension

        ext_modules = cythonize(
            [Extension("pathspace._kernels", ["src/pathspace/_kernels.pyx"],
                       include_dirs=[np.get_include()], extra_compile_args=["-O3"])],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
