"""Build the optional compiled kernels.

The package works without them; ``conflab._backend`` falls back to the
pure-Python kernels when the extension cannot be imported.
"""
import os

from setuptools import setup

ext_modules = []
if os.environ.get("CONFLAB_NO_EXT") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "conflab._ckernels",
                    ["src/conflab/_ckernels.pyx"],
                    include_dirs=[np.get_include()],
                    language="c++",
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
