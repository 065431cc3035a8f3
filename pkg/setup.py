"""Build script with an optional compiled kernel.

The package installs fine without a C toolchain: the extension build is
attempted, and on any failure the pure-numpy backend in
privmeter._kernels is used at import time instead.
"""

import os

from setuptools import setup

ext_modules = []
if os.environ.get("PRIVMETER_NO_EXT") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "privmeter._kernels._kernels_c",
                    ["src/privmeter/_kernels/_kernels_c.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except Exception as exc:  # no Cython/compiler: fall back to pure python
        print(f"privmeter: skipping compiled kernel build ({exc})")
        ext_modules = []

setup(ext_modules=ext_modules)
