"""Build script: compiles the optional Cython engine.

The package works without the extension (a pure-Python engine is selected at
import time), so any build failure here downgrades to a plain install instead
of aborting.  Build in place for development with

    python3 setup.py build_ext --inplace
"""

import sys

from setuptools import Extension, setup


def _extensions():
    try:
        import numpy
        from Cython.Build import cythonize
    except ImportError:
        print("gneforge: Cython/numpy unavailable at build time; "
              "skipping compiled engine", file=sys.stderr)
        return []
    ext = Extension(
        "gneforge._engine_cy",
        sources=["src/gneforge/_engine_cy.pyx"],
        include_dirs=[numpy.get_include()],
        extra_compile_args=["-O3"] if sys.platform != "win32" else ["/O2"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize(
        [ext],
        compiler_directives={
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "language_level": "3",
        },
    )


try:
    setup(ext_modules=_extensions())
except SystemExit:
    raise
except Exception as exc:  # compiler missing, etc. — install without the extension
    print(f"gneforge: compiled engine skipped ({exc}); "
          "falling back to pure-Python build", file=sys.stderr)
    setup(ext_modules=[])
