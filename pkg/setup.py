import os

from setuptools import setup

ext_modules = []
if os.environ.get("DDLSCHED_NO_EXT") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [Extension("ddlsched._kernels", ["src/ddlsched/_kernels.pyx"],
                       include_dirs=[np.get_include()],
                       define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                       extra_compile_args=["-O3"])],
            compiler_directives={"language_level": "3", "boundscheck": False,
                                 "wraparound": False, "cdivision": True},
        )
    except ImportError:
        # no Cython: the pure-Python kernels are used
        ext_modules = []

setup(ext_modules=ext_modules)
