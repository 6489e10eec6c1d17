"""Builds the optional compiled kernel extension.

The package works without it: fuzzybridge.kernels falls back to the NumPy
implementation when the extension is missing.
"""

import numpy
from setuptools import Extension, setup
from Cython.Build import cythonize

extensions = [
    Extension(
        "fuzzybridge.kernels._speedups",
        sources=["src/fuzzybridge/kernels/_speedups.pyx"],
    )
]

setup(
    ext_modules=cythonize(extensions, language_level=3),
    include_dirs=[numpy.get_include()],
)
