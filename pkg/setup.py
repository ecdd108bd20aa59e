import os

import numpy as np
from setuptools import Extension, setup

# Vectorised libm (erf/exp) needs -ffast-math; PONITA_PORTABLE=1 drops the
# host-specific flags for builds meant to run on other machines.
flags = ["-O3"]
if os.environ.get("PONITA_PORTABLE", "") in ("", "0"):
    flags += ["-ffast-math", "-march=native", "-fopenmp-simd"]

ext_modules = []
if os.environ.get("PONITA_PURE_PYTHON", "") in ("", "0"):
    try:
        from Cython.Build import cythonize
    except ImportError:  # build without the extension; numpy fallback is used
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [
                Extension(
                    "ponita._native",
                    ["src/ponita/_native.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=flags,
                    libraries=["m"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
