import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("DEEPCORPUS_NO_EXT") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
    except ImportError:
        # pure-Python fallback in deepcorpus._scan_py takes over
        pass
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "deepcorpus._scan",
                    ["src/deepcorpus/_scan.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
