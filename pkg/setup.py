"""Builds the optional compiled kernels; the package falls back to numpy without them."""

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension
except ImportError:  # no Cython or numpy at build time: pure-Python install
    pass
else:
    ext_modules = cythonize(
        [
            Extension(
                "wavestab.kernels._ckernels",
                ["src/wavestab/kernels/_ckernels.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                optional=True,
            )
        ],
        language_level=3,
    )

setup(ext_modules=ext_modules)
