"""Simulation and post-processing toolkit for a laser phase-noise QRNG.

Stages: Wiener phase noise through a recirculating delay-loop interferometer
(``laser``), 8-bit digitization (``detection``), plug-in min-entropy
(``entropy``), Toeplitz hashing (``toeplitz``), statistical tests
(``randomness``), and the orchestration in ``pipeline`` / ``cli``.
"""

__version__ = "0.1.0"

from .kernels import BACKEND as KERNEL_BACKEND  # noqa: E402

__all__ = ["__version__", "KERNEL_BACKEND"]
