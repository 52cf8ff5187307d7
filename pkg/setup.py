"""Build script: compiles the fast-BCS kernel if Cython + a C compiler are present.

The package works without the extension (a NumPy implementation of the same
kernel is selected at import time), so any failure here downgrades to a
pure-Python build instead of aborting.
"""

import os
import sys

from setuptools import Extension, setup

PYX = "src/uwbsim/recovery/_fastbcs.pyx"


def extensions():
    if not os.path.exists(PYX):
        return []
    try:
        import numpy
        from Cython.Build import cythonize
    except ImportError as exc:
        print(f"uwbsim: building without compiled kernel ({exc})", file=sys.stderr)
        return []
    ext = Extension(
        "uwbsim.recovery._fastbcs",
        sources=[PYX],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3"],
    )
    return cythonize([ext], language_level=3)


setup(ext_modules=extensions())
