import os

from setuptools import Extension, setup

# The compiled core is optional: the package falls back to a pure-numpy
# implementation of the same kernels when the extension is unavailable.
ext_modules = []
if os.environ.get("PRISMSEL_PURE_PYTHON", "0") != "1":
    try:
        import numpy
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "prismsel._core._speedups",
                    ["src/prismsel/_core/_speedups.pyx"],
                    include_dirs=[numpy.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            language_level=3,
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
