import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

# The compiled inner loop is optional at runtime (regcore.cnn falls back to
# the NumPy kernels if the extension is missing), but we always try to build
# it here.
extensions = [
    Extension(
        "regcore.cnn._inner",
        ["src/regcore/cnn/_inner.pyx"],
        include_dirs=[np.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
]

setup(ext_modules=cythonize(extensions, language_level=3))
