from setuptools import setup
from setuptools.extension import Extension

# The compiled kernels are optional: without Cython (or a C compiler) the
# package installs anyway and falls back to the NumPy implementation.
try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

ext_modules = []
if cythonize is not None:
    ext_modules = cythonize(
        [
            Extension(
                "somqe._kernels_cy",
                ["src/somqe/_kernels_cy.pyx"],
                # no FP contraction: results must match the NumPy backend
                # bit for bit
                extra_compile_args=["-O3", "-ffp-contract=off"],
            )
        ],
        language_level=3,
    )

setup(ext_modules=ext_modules)
