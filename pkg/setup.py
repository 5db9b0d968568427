"""Build script for the optional compiled bilinear sampling kernels.

The package works without the extension (a vectorized numpy fallback is
selected at import time); building it just makes warping faster.
"""
import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

extensions = []
if cythonize is not None:
    extensions = cythonize(
        [
            Extension(
                "mpisolve.kernels._bilinear_cy",
                ["src/mpisolve/kernels/_bilinear_cy.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )

setup(ext_modules=extensions)
