"""Kernel backend selection.

The compiled extension ``phaseqrng._kernels`` is used when it was built and
``PHASEQRNG_PURE`` is not set to ``1``; otherwise the numpy versions in
``phaseqrng._kernels_py`` are used. Both expose the same functions.
"""

import os

from . import _kernels_py as fallback

try:
    from . import _kernels as compiled
except ImportError:  # extension not built
    compiled = None

if compiled is not None and os.environ.get("PHASEQRNG_PURE") != "1":
    active = compiled
    BACKEND = "cython"
else:
    active = fallback
    BACKEND = "numpy"

toeplitz_parity = active.toeplitz_parity
superpose = active.superpose

__all__ = ["BACKEND", "compiled", "fallback", "active", "toeplitz_parity", "superpose"]
