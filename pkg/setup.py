from setuptools import setup

try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "prodt1._core",
                ["src/prodt1/_core.pyx"],
                extra_compile_args=["-O3"],
                include_dirs=[numpy.get_include()],
            )
        ],
        language_level=3,
    )
except ImportError:
    # no Cython or numpy at build time: the numpy fallback is used
    ext_modules = []

setup(ext_modules=ext_modules)
