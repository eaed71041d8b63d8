import os

from setuptools import Extension, setup

# The compiled kernel core is optional: without it the package falls back to
# the numpy implementation at import time (see onn4f.backend).
ext_modules = []
if os.environ.get("ONN4F_SKIP_EXT", "0") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "onn4f._core",
                    ["src/onn4f/_core.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
