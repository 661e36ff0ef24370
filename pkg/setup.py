import numpy
from setuptools import setup

try:
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    from setuptools import Extension

    ext_modules = cythonize(
        [Extension("dpgls._sweep", ["src/dpgls/_sweep.pyx"],
                   include_dirs=[numpy.get_include()],
                   extra_compile_args=["-O3"])],
        language_level=3,
    )

setup(ext_modules=ext_modules)
