"""Build script for the optional compiled rasterizer kernel.

The package works without the extension (a numpy fallback is selected at
import time), so a failed compile downgrades to a warning instead of
aborting the install.
"""

import sys

import numpy
from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


# -ffp-contract=off: the compiled kernel must be bit-identical to the numpy
# fallback, so fused multiply-adds are disabled.
EXT_COMPILE_ARGS = ["-O2", "-ffp-contract=off"]

try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "posesynth.raster._kernel",
                ["src/posesynth/raster/_kernel.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=EXT_COMPILE_ARGS,
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    extensions = []


class OptionalBuildExt(build_ext):
    """Treat extension build failures as non-fatal."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing, etc.
            print(f"WARNING: compiled kernel skipped ({exc}); "
                  "falling back to the pure-python rasterizer", file=sys.stderr)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(f"WARNING: building {ext.name} failed ({exc}); "
                  "falling back to the pure-python rasterizer", file=sys.stderr)


setup(ext_modules=extensions, cmdclass={"build_ext": OptionalBuildExt})
