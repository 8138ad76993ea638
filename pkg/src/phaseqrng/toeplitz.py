"""Seeded Toeplitz hashing over GF(2).

Matrix convention: ``T[i][j] = seed[i - j + n - 1]`` for ``i < m`` and
``j < n``, so the first row reads ``seed[n-1], ..., seed[0]`` and the first
column reads ``seed[n-1], ..., seed[n+m-2]``. Output bit ``i`` is
``XOR_j T[i][j] & x[j]``, which equals coefficient ``n - 1 + i`` of the
integer convolution ``seed * x`` reduced mod 2.

Bit streams are numpy ``uint8`` arrays of 0/1 values. Files hold packed
bytes, most significant bit first.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import Decimal
from pathlib import Path

import numpy as np
import scipy.fft

from . import kernels
from .rng import random_bits, stream

DEFAULT_EPSILON_LOG2 = 50
MANTISSA_BITS = 53
SAFETY_MARGIN_BITS = 5
# rounding residual above this aborts; exact arithmetic gives ~1e-8 at n = 5e6
ROUNDING_TOLERANCE = 0.25


class ExactnessError(ArithmeticError):
    """The floating-point convolution could not be proven exact."""


@dataclass(frozen=True, eq=False)
class ToeplitzSpec:
    n: int
    m: int
    seed: np.ndarray

    def __post_init__(self):
        if self.m < 1 or self.n < self.m:
            raise ValueError(f"need 1 <= m <= n, got n={self.n}, m={self.m}")
        seed = np.ascontiguousarray(self.seed, dtype=np.uint8)
        if seed.ndim != 1 or seed.size != self.n + self.m - 1:
            raise ValueError(f"seed must hold n + m - 1 = {self.n + self.m - 1} bits, got {seed.size}")
        if seed.size and int(seed.max()) > 1:
            raise ValueError("seed must contain only 0/1 values")
        object.__setattr__(self, "seed", seed)

    @classmethod
    def random(cls, n: int, m: int, rng_seed: int, label: str = "toeplitz-seed") -> "ToeplitzSpec":
        return cls(n, m, random_bits(stream(rng_seed, label), n + m - 1))


def output_length(n: int, h_min_per_symbol: float, bits_per_symbol: int = 8,
                  epsilon_log2: int = DEFAULT_EPSILON_LOG2) -> int:
    """``floor(n * h / bits_per_symbol) - 2 * epsilon_log2``, clamped at zero.

    ``h`` is taken at its shortest decimal representation so that values
    typed as decimals (6.27) do not lose a bit to binary rounding.
    """
    if not 0 <= h_min_per_symbol <= bits_per_symbol:
        raise ValueError(f"h_min must lie in [0, {bits_per_symbol}], got {h_min_per_symbol}")
    if n < 0 or n % bits_per_symbol:
        raise ValueError(f"n must be a non-negative multiple of {bits_per_symbol}, got {n}")
    if epsilon_log2 < 0:
        raise ValueError("epsilon_log2 must be >= 0")
    raw = int(Decimal(n) * Decimal(repr(float(h_min_per_symbol))) // bits_per_symbol)
    return max(raw - 2 * epsilon_log2, 0)


def toeplitz_matrix(spec: ToeplitzSpec) -> np.ndarray:
    """Dense ``m x n`` matrix; intended for small sizes."""
    i = np.arange(spec.m)[:, None]
    j = np.arange(spec.n)[None, :]
    return spec.seed[i - j + spec.n - 1]


def _check_input(spec: ToeplitzSpec, x) -> np.ndarray:
    x = np.ascontiguousarray(x, dtype=np.uint8)
    if x.ndim != 1 or x.size != spec.n:
        raise ValueError(f"input must hold n = {spec.n} bits, got {x.size}")
    return x


def _pack_words(bits: np.ndarray, extra_words: int = 0) -> np.ndarray:
    """LSB-first ``uint64`` packing used by the parity kernels."""
    nw = (bits.size + 63) // 64 + extra_words
    padded = np.zeros(nw * 64, dtype=np.uint8)
    padded[:bits.size] = bits
    return np.packbits(padded, bitorder="little").view("<u8")


def extract_naive(spec: ToeplitzSpec, x) -> np.ndarray:
    """Row-by-row GF(2) matrix-vector product, 64 columns per machine word.

    Work is ``O(m * n / 64)``; this is the reference the fast path is
    checked against.
    """
    x = _check_input(spec, x)
    # y[i] = XOR_l seed[i + l] & x[n - 1 - l]: slide a seed window over reversed x
    x_words = _pack_words(x[::-1])
    seed_words = _pack_words(spec.seed, extra_words=2)
    return kernels.toeplitz_parity(seed_words, x_words, spec.m)


def fft_length(n: int, m: int) -> int:
    """Cyclic length that makes the wanted coefficients alias-free."""
    return scipy.fft.next_fast_len(n + m - 1, real=True)


def exactness_bound_ok(n: int, length: int, mantissa_bits: int = MANTISSA_BITS,
                       margin_bits: int = SAFETY_MARGIN_BITS) -> bool:
    """Whether coefficients up to ``n`` survive a length-``length`` float transform."""
    need = math.ceil(math.log2(max(n, 2))) + math.ceil(math.log2(max(length, 2))) + margin_bits
    return need <= mantissa_bits


class FastExtractor:
    """FFT Toeplitz hashing for one spec, caching the seed spectrum.

    If the exactness bound fails for the full shape, the matrix is split in
    half along its longer side (each half is again Toeplitz) until every
    piece satisfies it. A rounding residual above ``ROUNDING_TOLERANCE``
    raises :class:`ExactnessError`.
    """

    def __init__(self, spec: ToeplitzSpec, mantissa_bits: int = MANTISSA_BITS):
        self.spec = spec
        self.mantissa_bits = mantissa_bits
        self._length = fft_length(spec.n, spec.m)
        self._split = not exactness_bound_ok(spec.n, self._length, mantissa_bits)
        self._seed_spectrum = None
        if not self._split:
            self._seed_spectrum = scipy.fft.rfft(spec.seed.astype(np.float64), self._length)

    def __call__(self, x) -> np.ndarray:
        x = _check_input(self.spec, x)
        if self._split:
            return _extract_split(self.spec.seed, x, self.spec.n, self.spec.m, self.mantissa_bits)
        return _convolve_parity(self._seed_spectrum, x, self.spec.n, self.spec.m, self._length)


def _convolve_parity(seed_spectrum, x, n, m, length):
    prod = scipy.fft.rfft(x.astype(np.float64), length)
    prod *= seed_spectrum
    coeffs = scipy.fft.irfft(prod, length)[n - 1:n - 1 + m]
    rounded = np.rint(coeffs)
    residual = float(np.max(np.abs(coeffs - rounded))) if m else 0.0
    if not residual <= ROUNDING_TOLERANCE:
        raise ExactnessError(f"convolution residual {residual:.3g} exceeds {ROUNDING_TOLERANCE}")
    if rounded.min() < 0 or rounded.max() > n:
        raise ExactnessError("convolution coefficient outside [0, n]")
    return (rounded.astype(np.int64) & 1).astype(np.uint8)


def _extract_split(seed, x, n, m, mantissa_bits):
    length = fft_length(n, m)
    if exactness_bound_ok(n, length, mantissa_bits):
        spectrum = scipy.fft.rfft(seed.astype(np.float64), length)
        return _convolve_parity(spectrum, x, n, m, length)
    if n <= 1 and m <= 1:
        raise ExactnessError(f"cannot meet the exactness bound with {mantissa_bits} mantissa bits")
    if n >= m:
        h = n // 2
        # columns [0, h) use seed[n - h : n + m - 1]; columns [h, n) use seed[0 : n - h + m - 1]
        left = _extract_split(seed[n - h:n + m - 1], x[:h], h, m, mantissa_bits)
        right = _extract_split(seed[:n - h + m - 1], x[h:], n - h, m, mantissa_bits)
        return left ^ right
    h = m // 2
    top = _extract_split(seed[:n + h - 1], x, n, h, mantissa_bits)
    bottom = _extract_split(seed[h:n + m - 1], x, n, m - h, mantissa_bits)
    return np.concatenate([top, bottom])


def extract_fast(spec: ToeplitzSpec, x) -> np.ndarray:
    """FFT-convolution Toeplitz hashing; bit-identical to :func:`extract_naive`."""
    return FastExtractor(spec)(x)


@dataclass
class StreamResult:
    bits: np.ndarray
    n: int
    m: int
    blocks: int
    seeds: list[np.ndarray]


def stream_extract(symbols, n: int, h_min: float, *, bits_per_symbol: int = 8,
                   epsilon_log2: int = DEFAULT_EPSILON_LOG2, seed_bits=None,
                   seed_policy: str = "fixed", rng_seed: int = 0) -> StreamResult:
    """Hash consecutive ``n``-bit blocks of an unpacked symbol stream.

    Symbols unpack MSB-first. A trailing partial block is dropped. With
    ``seed_policy="fixed"`` one seed (``seed_bits`` or drawn from
    ``rng_seed``) serves every block; ``"fresh"`` draws a new seed per block
    from the ``rng_seed`` stream and ignores ``seed_bits``.
    """
    if seed_policy not in ("fixed", "fresh"):
        raise ValueError(f"unknown seed policy {seed_policy!r}")
    symbols = np.asarray(symbols)
    if bits_per_symbol == 8:
        bits = np.unpackbits(symbols.astype(np.uint8))
    else:
        shifts = np.arange(bits_per_symbol - 1, -1, -1)
        bits = ((symbols.astype(np.int64)[:, None] >> shifts) & 1).astype(np.uint8).ravel()
    return stream_extract_bits(bits, n, h_min, bits_per_symbol=bits_per_symbol,
                               epsilon_log2=epsilon_log2, seed_bits=seed_bits,
                               seed_policy=seed_policy, rng_seed=rng_seed)


def stream_extract_bits(bits, n: int, h_min: float, *, bits_per_symbol: int = 8,
                        epsilon_log2: int = DEFAULT_EPSILON_LOG2, seed_bits=None,
                        seed_policy: str = "fixed", rng_seed: int = 0) -> StreamResult:
    """:func:`stream_extract` on an already unpacked bit stream."""
    bits = np.ascontiguousarray(bits, dtype=np.uint8)
    if bits.size < n:
        raise ValueError(f"stream of {bits.size} bits is shorter than one block of {n}")
    m = output_length(n, h_min, bits_per_symbol, epsilon_log2)
    if m < 1:
        raise ValueError(f"min-entropy {h_min} leaves no extractable bits for n={n}")
    blocks = bits.size // n
    gen = stream(rng_seed, "toeplitz-seed")
    out = np.empty(blocks * m, dtype=np.uint8)
    seeds = []
    extractor = None
    for b in range(blocks):
        if extractor is None or seed_policy == "fresh":
            if seed_policy == "fixed" and seed_bits is not None:
                spec = ToeplitzSpec(n, m, seed_bits)
            else:
                spec = ToeplitzSpec(n, m, random_bits(gen, n + m - 1))
            seeds.append(spec.seed)
            extractor = FastExtractor(spec)
        out[b * m:(b + 1) * m] = extractor(bits[b * n:(b + 1) * n])
    return StreamResult(out, n, m, blocks, seeds)


def pack_bits(bits) -> bytes:
    """MSB-first packing; the final byte is zero-padded."""
    return np.packbits(np.asarray(bits, dtype=np.uint8)).tobytes()


def unpack_bits(data: bytes, count: int | None = None) -> np.ndarray:
    bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8))
    if count is not None:
        if count > bits.size:
            raise ValueError(f"need {count} bits, file holds {bits.size}")
        bits = bits[:count]
    return bits


def write_bits(bits, path: str | Path) -> None:
    Path(path).write_bytes(pack_bits(bits))


def read_bits(path: str | Path, count: int | None = None) -> np.ndarray:
    return unpack_bits(Path(path).read_bytes(), count)


def write_seed(spec: ToeplitzSpec, path: str | Path) -> None:
    write_bits(spec.seed, path)


def read_seed(path: str | Path, n: int, m: int) -> np.ndarray:
    """Seed bits from a packed file of exactly ``ceil((n + m - 1) / 8)`` bytes."""
    data = Path(path).read_bytes()
    count = n + m - 1
    if len(data) != (count + 7) // 8:
        raise ValueError(f"seed file must hold {(count + 7) // 8} bytes for n={n}, m={m}, got {len(data)}")
    bits = unpack_bits(data)
    if bits[count:].any():
        raise ValueError("seed file pad bits must be zero")
    return bits[:count]
