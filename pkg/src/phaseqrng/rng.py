"""Seeded random streams.

Every stochastic stage draws from its own Philox-4x64 counter-based stream.
The 128-bit Philox key is ``blake2b(f"{seed}:{label}")`` truncated to 16
bytes, so a master seed plus a stage label fixes the stream on every
platform. Gaussian variates come from the Box-Muller transform applied to
Philox doubles; numpy's ziggurat sampler is deliberately not used.
"""

from __future__ import annotations

import hashlib

import numpy as np

U64_MAX = (1 << 64) - 1


def derive_key(seed: int, label: str) -> int:
    """128-bit integer key for ``(seed, label)``."""
    if not 0 <= seed <= U64_MAX:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    digest = hashlib.blake2b(f"{seed}:{label}".encode(), digest_size=16).digest()
    return int.from_bytes(digest, "little")


def derive_seed(seed: int, label: str) -> int:
    """Child seed (u64) for a labelled stage of a master seed."""
    return derive_key(seed, label) & U64_MAX


def stream(seed: int, label: str) -> np.random.Generator:
    """Philox generator for ``(seed, label)``."""
    return np.random.Generator(np.random.Philox(key=derive_key(seed, label)))


def gaussian(gen: np.random.Generator, size: int) -> np.ndarray:
    """Standard normal draws by Box-Muller, consuming ``2 * ceil(size / 2)`` doubles."""
    half = (size + 1) // 2
    u = gen.random((2, half))
    radius = np.sqrt(-2.0 * np.log1p(-u[0]))  # 1 - u in (0, 1]
    angle = 2.0 * np.pi * u[1]
    out = np.empty(2 * half)
    out[:half] = radius * np.cos(angle)
    out[half:] = radius * np.sin(angle)
    return out[:size]


def random_bits(gen: np.random.Generator, count: int) -> np.ndarray:
    """``count`` uniform bits as a uint8 0/1 array."""
    raw = gen.integers(0, 256, size=(count + 7) // 8, dtype=np.uint8)
    return np.unpackbits(raw)[:count]
