import os

import numpy
from setuptools import Extension, setup

ext_modules = []
if os.path.exists("src/fallplan/core/_fast.pyx"):
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "fallplan.core._fast",
                ["src/fallplan/core/_fast.pyx"],
                extra_compile_args=["-O3"],
                include_dirs=[numpy.get_include()],
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
