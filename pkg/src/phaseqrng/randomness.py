"""ENT statistics, NIST monobit and runs tests, KS p-value combination.

Counts behind the bit-level statistics live in :class:`BitStats`, which
merges across consecutive partitions: ``BitStats.from_bits(a + b) ==
BitStats.from_bits(a).merge(BitStats.from_bits(b))``. The merge carries the
boundary bit so that the lag-1 products and run transitions spanning a seam
are counted once.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy import special, stats

DEFAULT_P_LOW = 0.01
DEFAULT_P_HIGH = 0.99
MIN_NIST_BITS = 100
MIN_KS_PVALUES = 5

_MC_COORD_MAX = (1 << 24) - 1


@dataclass(frozen=True)
class BitStats:
    n: int
    ones: int
    adjacent_ones: int  # pairs (x[i], x[i+1]) with both bits set
    transitions: int  # i with x[i] != x[i+1]
    first: int
    last: int

    @classmethod
    def from_bits(cls, bits) -> "BitStats":
        b = np.asarray(bits, dtype=np.uint8)
        if b.size == 0:
            raise ValueError("empty bit stream")
        return cls(
            n=int(b.size),
            ones=int(np.count_nonzero(b)),
            adjacent_ones=int(np.count_nonzero(b[:-1] & b[1:])),
            transitions=int(np.count_nonzero(b[:-1] != b[1:])),
            first=int(b[0]),
            last=int(b[-1]),
        )

    def merge(self, other: "BitStats") -> "BitStats":
        return BitStats(
            n=self.n + other.n,
            ones=self.ones + other.ones,
            adjacent_ones=self.adjacent_ones + other.adjacent_ones + (self.last & other.first),
            transitions=self.transitions + other.transitions + (self.last != other.first),
            first=self.first,
            last=other.last,
        )

    @property
    def runs(self) -> int:
        return self.transitions + 1

    def serial_correlation(self) -> float:
        """Pearson coefficient of ``(x[i], x[i+1])``; NaN when undefined."""
        pairs = self.n - 1
        if pairs < 1:
            return math.nan
        sx = self.ones - self.last
        sy = self.ones - self.first
        # bits are 0/1, so sum x^2 == sum x
        num = pairs * self.adjacent_ones - sx * sy
        var_x = pairs * sx - sx * sx
        var_y = pairs * sy - sy * sy
        if var_x <= 0 or var_y <= 0:
            return math.nan
        return num / math.sqrt(var_x * var_y)


@dataclass(frozen=True)
class EntReport:
    bits: int
    entropy_bits_per_bit: float
    chi_square: float
    chi_square_excess_prob: float
    arithmetic_mean: float
    monte_carlo_pi: float
    pi_error_percent: float
    serial_correlation: float
    chi_square_bytes: float
    chi_square_bytes_excess_prob: float

    @property
    def serial_correlation_defined(self) -> bool:
        return not math.isnan(self.serial_correlation)

    @property
    def monte_carlo_defined(self) -> bool:
        return not math.isnan(self.monte_carlo_pi)


@dataclass(frozen=True)
class PValue:
    value: float
    test: str

    def __post_init__(self):
        if not 0.0 <= self.value <= 1.0:
            raise ValueError(f"p-value {self.value} outside [0, 1]")

    def passes(self, low: float = DEFAULT_P_LOW, high: float = DEFAULT_P_HIGH) -> bool:
        return low <= self.value <= high


def _clamp01(p: float) -> float:
    return min(max(float(p), 0.0), 1.0)


def monte_carlo_pi(bits) -> float:
    """Pi from 24-bit coordinate pairs in 6-byte groups of the MSB-first byte stream.

    Each group gives ``X`` (bytes 0-2) and ``Y`` (bytes 3-5), big-endian; a
    point is inside when ``X**2 + Y**2 < (2**24 - 1)**2``. NaN if the stream
    holds no complete group.
    """
    data = np.packbits(np.asarray(bits, dtype=np.uint8)[: (len(bits) // 48) * 48])
    groups = data.reshape(-1, 6).astype(np.int64)
    if groups.shape[0] == 0:
        return math.nan
    x = (groups[:, 0] << 16) | (groups[:, 1] << 8) | groups[:, 2]
    y = (groups[:, 3] << 16) | (groups[:, 4] << 8) | groups[:, 5]
    inside = np.count_nonzero(x * x + y * y < _MC_COORD_MAX * _MC_COORD_MAX)
    return 4.0 * inside / groups.shape[0]


def _binary_entropy(ones: int, n: int) -> float:
    h = 0.0
    for c in (ones, n - ones):
        if c:
            p = c / n
            h -= p * math.log2(p)
    return h


def ent_battery(bits) -> EntReport:
    """Bit-level ENT statistics (entropy, chi-square, mean, Monte-Carlo pi, serial correlation).

    Byte-level chi-square over complete MSB-first bytes is included as a
    secondary statistic (NaN below one byte).
    """
    b = np.asarray(bits, dtype=np.uint8)
    if b.size < 2:
        raise ValueError(f"ENT needs at least 2 bits, got {b.size}")
    st = BitStats.from_bits(b)
    n = st.n
    expected = n / 2.0
    chi = ((st.ones - expected) ** 2 + (n - st.ones - expected) ** 2) / expected
    pi_est = monte_carlo_pi(b)

    nbytes = n // 8
    if nbytes:
        counts = np.bincount(np.packbits(b[: nbytes * 8]), minlength=256)
        e = nbytes / 256.0
        chi_b = float(((counts - e) ** 2).sum() / e)
        chi_b_p = _clamp01(stats.chi2.sf(chi_b, 255))
    else:
        chi_b = chi_b_p = math.nan

    return EntReport(
        bits=n,
        entropy_bits_per_bit=_binary_entropy(st.ones, n),
        chi_square=chi,
        chi_square_excess_prob=_clamp01(stats.chi2.sf(chi, 1)),
        arithmetic_mean=st.ones / n,
        monte_carlo_pi=pi_est,
        pi_error_percent=100.0 * abs(pi_est - math.pi) / math.pi,
        serial_correlation=st.serial_correlation(),
        chi_square_bytes=chi_b,
        chi_square_bytes_excess_prob=chi_b_p,
    )


def _nist_stats(bits) -> BitStats:
    st = bits if isinstance(bits, BitStats) else BitStats.from_bits(bits)
    if st.n < MIN_NIST_BITS:
        raise ValueError(f"NIST tests need at least {MIN_NIST_BITS} bits, got {st.n}")
    return st


def monobit_test(bits) -> PValue:
    """NIST frequency test, ``erfc(|S| / sqrt(2n))`` with ``S = sum(2b - 1)``."""
    st = _nist_stats(bits)
    s = 2 * st.ones - st.n
    return PValue(_clamp01(math.erfc(abs(s) / math.sqrt(2.0 * st.n))), "monobit")


def runs_test(bits) -> PValue:
    """NIST runs test; p = 0 when the frequency prerequisite fails."""
    st = _nist_stats(bits)
    n = st.n
    pi = st.ones / n
    if abs(pi - 0.5) >= 2.0 / math.sqrt(n):
        return PValue(0.0, "runs")
    spread = pi * (1.0 - pi)
    z = abs(st.runs - 2.0 * n * spread) / (2.0 * math.sqrt(2.0 * n) * spread)
    return PValue(_clamp01(math.erfc(z)), "runs")


def ks_statistic(values) -> float:
    """One-sample KS distance from the uniform CDF on [0, 1]."""
    x = np.sort(np.asarray(values, dtype=np.float64))
    k = x.size
    i = np.arange(1, k + 1)
    return float(max(np.max(i / k - x), np.max(x - (i - 1) / k)))


def ks_uniformity(pvalues) -> PValue:
    """Uniformity of a p-value collection via the asymptotic Kolmogorov law."""
    vals = [p.value if isinstance(p, PValue) else float(p) for p in pvalues]
    if len(vals) < MIN_KS_PVALUES:
        raise ValueError(f"KS combination needs at least {MIN_KS_PVALUES} p-values, got {len(vals)}")
    d = ks_statistic(vals)
    return PValue(_clamp01(special.kolmogorov(math.sqrt(len(vals)) * d)), "ks_uniformity")


@dataclass
class TestReport:
    __test__ = False  # not a pytest class

    ent: EntReport
    pvalues: list[PValue]
    p_low: float = DEFAULT_P_LOW
    p_high: float = DEFAULT_P_HIGH

    def verdicts(self) -> dict[str, bool]:
        out = {p.test: p.passes(self.p_low, self.p_high) for p in self.pvalues}
        out["ent_chi_square"] = self.p_low <= self.ent.chi_square_excess_prob <= self.p_high
        return out

    @property
    def passed(self) -> bool:
        return all(self.verdicts().values())

    def as_items(self) -> list[tuple[str, object]]:
        items: list[tuple[str, object]] = [(f"ent.{k}", v) for k, v in asdict(self.ent).items()]
        items.append(("ent.serial_correlation_defined", self.ent.serial_correlation_defined))
        for p in self.pvalues:
            items.append((f"p.{p.test}", p.value))
        items += [("threshold.p_low", self.p_low), ("threshold.p_high", self.p_high)]
        items += [(f"pass.{k}", v) for k, v in self.verdicts().items()]
        items.append(("pass.all", self.passed))
        return items

    def to_text(self) -> str:
        return "".join(f"{k} = {_fmt(v)}\n" for k, v in self.as_items())

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["key", "value"])
        for k, v in self.as_items():
            w.writerow([k, _fmt(v)])
        return buf.getvalue()


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    return str(v)


def run_tests(bits, p_low: float = DEFAULT_P_LOW, p_high: float = DEFAULT_P_HIGH,
              block_bits: int | None = None) -> TestReport:
    """ENT, monobit and runs on the whole stream.

    With ``block_bits`` set and at least five whole blocks available, the
    per-block monobit and runs p-values are also combined by the KS test.
    """
    b = np.asarray(bits, dtype=np.uint8)
    pvalues = [monobit_test(b), runs_test(b)]
    if block_bits and b.size // block_bits >= MIN_KS_PVALUES:
        chunks = b[: (b.size // block_bits) * block_bits].reshape(-1, block_bits)
        mono = [monobit_test(c) for c in chunks]
        runs = [runs_test(c) for c in chunks]
        pvalues.append(PValue(ks_uniformity(mono).value, "ks_monobit"))
        pvalues.append(PValue(ks_uniformity(runs).value, "ks_runs"))
    return TestReport(ent_battery(b), pvalues, p_low, p_high)


def write_report(report: TestReport, stem: str | Path) -> None:
    """``<stem>.txt`` (key = value) and ``<stem>.csv``."""
    stem = Path(stem)
    stem.with_suffix(".txt").write_text(report.to_text())
    stem.with_suffix(".csv").write_text(report.to_csv())

