import numpy as np
from setuptools import Extension, setup

# The simulation kernel is an optional accelerator: if Cython or a C
# compiler is unavailable the package falls back to the vectorized numpy
# implementation selected at import time (mflq.simulate).
try:
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "mflq._simcore",
                ["src/mflq/_simcore.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
                optional=True,
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
