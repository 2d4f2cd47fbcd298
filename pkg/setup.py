"""Build hook for the optional compiled kernels.

The package works without them: ``ruelle._backend`` falls back to the numpy
implementation when ``ruelle._shooting`` cannot be imported.
"""
from setuptools import setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools import Extension
except ImportError:  # pragma: no cover
    pass
else:
    ext_modules = cythonize(
        [Extension(
            "ruelle._shooting",
            ["src/ruelle/_shooting.pyx"],
            include_dirs=[np.get_include()],
            define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            extra_compile_args=["-O3"],
            optional=True,
        )],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
