"""Build the optional compiled kernels.

Cython regenerates ``_kernels.c`` when it is installed; otherwise the shipped
C file is compiled. If compilation fails the package still installs and
falls back to the numpy kernels at import.
"""

import os

import numpy as np
from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

SOURCE = "src/vsloc/_kernels.pyx" if cythonize else "src/vsloc/_kernels.c"
ext = Extension("vsloc._kernels", [SOURCE], include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")])
extensions = cythonize([ext], language_level=3) if cythonize else [ext]


class OptionalBuildExt(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:
            if os.environ.get("VSLOC_REQUIRE_EXTENSION"):
                raise
            print(f"warning: compiled kernels not built ({exc}); using the numpy fallback")

    def build_extension(self, extension):
        try:
            super().build_extension(extension)
        except Exception as exc:
            if os.environ.get("VSLOC_REQUIRE_EXTENSION"):
                raise
            print(f"warning: {extension.name} not built ({exc}); using the numpy fallback")


setup(ext_modules=extensions, cmdclass={"build_ext": OptionalBuildExt})
