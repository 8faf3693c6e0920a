from Cython.Build import cythonize
from setuptools import Extension, setup

ext = Extension(
    "relabel._kernels._core",
    ["src/relabel/_kernels/_core.pyx"],
)

setup(ext_modules=cythonize([ext], language_level=3))
