"""Build script: compiles the optional accelerated kernel extension.

The package works without the extension (a pure-Python kernel module is
selected at import time), so a failed compile only costs speed.
"""

from setuptools import setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            "src/triloc/numcore/_kernels_c.pyx",
        ],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "initializedcheck": False,
        },
    )
    for ext in ext_modules:
        ext.extra_compile_args = ["-O3"]
except ImportError:
    print("Cython not available; building without the compiled kernel core.")

setup(ext_modules=ext_modules)
