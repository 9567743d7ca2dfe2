"""Build script: compiles the optional Cython kernels.

The package works without the extension (a pure-numpy fallback is selected at
import time), so any build failure here downgrades to a source-only install
rather than aborting. Set AQTRACK_PURE=1 to skip the compile step entirely.

-ffp-contract=off keeps the compiled kernels bit-identical to the fallback:
fused multiply-adds would otherwise round differently than numpy's separate
multiply and add.
"""

import os

from setuptools import Extension, setup


def extensions():
    if os.environ.get("AQTRACK_PURE") == "1":
        return []
    try:
        from Cython.Build import cythonize
    except ImportError:
        return []
    ext = Extension(
        "aqtrack._kernels._speedups",
        ["src/aqtrack/_kernels/_speedups.pyx"],
        extra_compile_args=["-O3", "-ffp-contract=off"],
        optional=True,
    )
    return cythonize([ext], compiler_directives={"language_level": "3"})


setup(ext_modules=extensions())
