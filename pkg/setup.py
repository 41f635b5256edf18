import numpy
from setuptools import Extension, setup

# The Monte Carlo trial kernel is the only hot loop; everything else is
# plain numpy/scipy. The build degrades to the pure-numpy kernel when
# Cython or a C compiler is unavailable (selection happens at import).
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "nomalink.mcsim._kernel",
                ["src/nomalink/mcsim/_kernel.pyx"],
                include_dirs=[numpy.get_include()],
                # -ffp-contract=off keeps FMA contraction from changing
                # roundings; the numpy fallback must match bit for bit.
                extra_compile_args=["-O3", "-ffp-contract=off"],
            )
        ],
        compiler_directives={
            "language_level": 3,
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
