import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "echovision.sim.kernels._raycast",
                ["src/echovision/sim/kernels/_raycast.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )
except ImportError:
    # No Cython at build time: install pure-Python; the numpy fallback
    # kernel is selected automatically at import.
    ext_modules = []

setup(ext_modules=ext_modules)
