"""Build the optional compiled kernels.

If Cython or a C compiler is missing the package still installs and
falls back to the numpy kernels at import time.
"""

import os

from setuptools import setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # noqa: BLE001
            print(f"warning: compiled kernels not built ({exc}); using numpy fallback")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # noqa: BLE001
            print(f"warning: failed to build {ext.name} ({exc}); using numpy fallback")


def _extensions():
    if os.environ.get("VRUTWIN_NO_EXT"):
        return []
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        return []
    flags = ["-O3", "-ffast-math"]
    if not os.environ.get("VRUTWIN_PORTABLE"):
        flags.append("-march=native")
    ext = Extension(
        "vrutwin._ext",
        ["src/vrutwin/_ext.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=flags,
        # vectorised exp comes from glibc libmvec under -ffast-math
        libraries=["mvec", "m"],
    )
    return cythonize([ext], compiler_directives={"language_level": "3"})


setup(ext_modules=_extensions(), cmdclass={"build_ext": OptionalBuildExt})
