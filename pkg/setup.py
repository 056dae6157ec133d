import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "cyclesync.zib._zibkern",
                ["src/cyclesync/zib/_zibkern.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
                # Pure-python fallback is selected at import if this fails.
                optional=True,
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
