"""Kernel selection.

The compiled extension is used when it imports; set ``BAGSTLS_PURE=1`` to
force the pure-Python kernels (used by the benchmark and parity tests).
"""

import os

from . import _kernels_py as pure

if os.environ.get("BAGSTLS_PURE"):
    kernels = pure
    COMPILED = False
else:
    try:
        from . import _kernels as kernels
        COMPILED = True
    except ImportError:  # extension not built
        kernels = pure
        COMPILED = False

lasso_cd_gram = kernels.lasso_cd_gram
rk4_lotka_volterra = kernels.rk4_lotka_volterra

__all__ = ["COMPILED", "kernels", "pure", "lasso_cd_gram", "rk4_lotka_volterra"]
