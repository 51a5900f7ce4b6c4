"""Build script for the optional compiled kernel extension.

The package is fully functional without the extension: the acoustics
kernels fall back to a NumPy implementation selected at import time.
Compilation failures are therefore tolerated, not fatal.
"""

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    """Build the accelerator if possible; warn and continue otherwise."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing, cython missing, ...
            print(f"warning: skipping compiled kernels ({exc}); "
                  "NumPy fallback will be used")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(f"warning: failed to build {ext.name} ({exc}); "
                  "NumPy fallback will be used")


def _extensions():
    try:
        import numpy
        from Cython.Build import cythonize
    except ImportError:
        return []
    ext = Extension(
        "trace_eval.acoustics._kernels",
        sources=["src/trace_eval/acoustics/_kernels.pyx"],
        include_dirs=[numpy.get_include()],
        # fast-math lets the compiler vectorize the tiled reductions
        extra_compile_args=["-O3", "-ffast-math"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize([ext], language_level=3)


setup(
    ext_modules=_extensions(),
    cmdclass={"build_ext": OptionalBuildExt},
)
