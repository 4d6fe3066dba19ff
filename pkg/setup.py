import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("TTSA_NO_EXT") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
    except ImportError:
        pass
    else:
        extensions = [
            Extension(
                "ttsa._kernel",
                ["src/ttsa/_kernel.pyx"],
                include_dirs=[np.get_include()],
                # no -ffast-math: the kernel must round like the numpy fallback
                extra_compile_args=["-O3", "-ffp-contract=off"],
            )
        ]
        ext_modules = cythonize(
            extensions,
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
