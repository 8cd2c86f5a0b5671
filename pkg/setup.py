"""Build script: compiles the optional selection-loop extension.

The package is fully functional without the extension (a pure-numpy backend is
selected at import time), so any failure here degrades to a warning rather than
aborting the install.  Set BEAMSELECT_NO_EXT=1 to skip the compile entirely.
"""

import os
import sys

from setuptools import setup


def _extensions():
    if os.environ.get("BEAMSELECT_NO_EXT"):
        return []
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools.extension import Extension
    except ImportError as exc:
        sys.stderr.write(f"beamselect: skipping compiled kernels ({exc})\n")
        return []

    # the C-level RNG distributions live in a static lib shipped inside numpy
    rng_lib_dir = os.path.join(os.path.dirname(numpy.random.__file__), "lib")
    ext = Extension(
        "beamselect._kernels._fast",
        sources=["src/beamselect/_kernels/_fast.pyx"],
        include_dirs=[numpy.get_include()],
        library_dirs=[rng_lib_dir],
        libraries=["npyrandom"],
        extra_compile_args=["-O3"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize([ext], language_level=3)


setup(ext_modules=_extensions())
