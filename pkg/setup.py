import os

import numpy as np
from setuptools import Extension, setup

ext_modules = []
if os.environ.get("RPS_NO_EXTENSION", "") != "1":
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "rps._kernels",
                ["src/rps/_kernels.pyx"],
                include_dirs=[np.get_include()],
                # no FMA contraction: keeps results identical to the Python kernels
                extra_compile_args=["-O3", "-ffp-contract=off"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
