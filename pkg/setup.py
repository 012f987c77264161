import os

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

ext_modules = []
if cythonize is not None and os.path.exists("src/zenocat/_stepper.pyx"):
    ext_modules = cythonize(
        [
            Extension(
                "zenocat._stepper",
                ["src/zenocat/_stepper.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )

# The compiled stepper is an accelerator; the package falls back to the
# pure-Python twin (zenocat._stepper_py) when the extension is absent.
setup(ext_modules=ext_modules)
