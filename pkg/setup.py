from setuptools import Extension, setup
from Cython.Build import cythonize

setup(
    ext_modules=cythonize(
        [
            Extension(
                "slfnet.kernels._lstm",
                ["src/slfnet/kernels/_lstm.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )
)
