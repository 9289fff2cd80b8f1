"""Build script for the optional compiled decoder kernel.

The package works without the extension (a numpy fallback is selected at
import time), but training is several times faster with it.
"""

import numpy
from Cython.Build import cythonize
from setuptools import setup
from setuptools.extension import Extension

extensions = [
    Extension(
        "genret.backends._core",
        sources=["src/genret/backends/_core.pyx"],
        include_dirs=[numpy.get_include()],
        # built from source on the host machine, so tuning for it is safe
        extra_compile_args=["-O3", "-march=native", "-funroll-loops"],
    )
]

setup(
    ext_modules=cythonize(
        extensions,
        compiler_directives={
            "language_level": 3,
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    ),
)
