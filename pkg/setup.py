"""Build hook: compiles the optional Cython kernel extension when possible.

The package is pure-Python correct without it; `spcsim.kernels` falls back to
the numpy implementations if the extension is missing. Build in place with

    python3 setup.py build_ext --inplace
"""

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        "src/spcsim/_kernels.pyx",
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "initializedcheck": False,
            "cdivision": True,
        },
    )
    for ext in ext_modules:
        ext.include_dirs.append(numpy.get_include())
        ext.define_macros.append(("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION"))
        ext.extra_compile_args.append("-O3")
except Exception:
    # No Cython / no compiler: install the pure-Python package.
    ext_modules = []

setup(ext_modules=ext_modules)
