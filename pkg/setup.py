import os

import numpy as np
from setuptools import Extension, setup

# CARRIER_SIM_PURE=1 skips the compiled core; the package then runs on the numpy fallback.
ext_modules = []
if not os.environ.get("CARRIER_SIM_PURE"):
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [
                Extension(
                    "carrier_sim._frame_core",
                    ["src/carrier_sim/_frame_core.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={
                "language_level": "3",
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
            },
        )

setup(ext_modules=ext_modules)
