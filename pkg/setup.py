"""Build script for the compiled event-simulation kernel.

The package works without the extension (a pure-Python kernel with identical
output is selected at import time), but the Monte Carlo verification suites
are only practical with the compiled core. Build failures therefore downgrade
to a warning instead of aborting the install.
"""

import warnings

from setuptools import Extension, setup

try:
    import numpy
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "qsdflow._kernels",
                ["src/qsdflow/_kernels.pyx"],
                include_dirs=[numpy.get_include()],
                # -ffp-contract=off: the Python fallback must be bit-identical,
                # so fused multiply-adds are disabled.
                extra_compile_args=["-O3", "-ffp-contract=off"],
            )
        ],
        language_level=3,
    )
except Exception as exc:  # pragma: no cover - exercised only on broken toolchains
    warnings.warn(f"building without the compiled kernel ({exc})")
    extensions = []

setup(ext_modules=extensions)
