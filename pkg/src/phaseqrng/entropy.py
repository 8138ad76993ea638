"""Plug-in min-entropy estimation of ADC sample blocks."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .detection import SampleBlock

MIN_SEGMENT_SAMPLES = 1_000_000


@dataclass(frozen=True)
class Histogram:
    """Occurrence counts for every code of a ``bits``-bit ADC."""

    counts: np.ndarray

    def __post_init__(self):
        if self.total < 1:
            raise ValueError("histogram must hold at least one sample")

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def bits(self) -> int:
        return int(self.counts.size).bit_length() - 1

    def __add__(self, other: "Histogram") -> "Histogram":
        if self.counts.size != other.counts.size:
            raise ValueError("cannot merge histograms of different resolution")
        return Histogram(self.counts + other.counts)


@dataclass(frozen=True)
class EntropyEstimate:
    h_min_per_symbol: float
    max_prob: float
    sample_count: int


def histogram(block: SampleBlock | np.ndarray, bits: int = 8) -> Histogram:
    """Exact code counts. Accepts a :class:`SampleBlock` or a bare code array."""
    if isinstance(block, SampleBlock):
        codes, bits = block.codes, block.calibration.bits
    else:
        codes = np.asarray(block)
    if codes.size == 0:
        raise ValueError("cannot histogram an empty block")
    counts = np.bincount(codes.ravel(), minlength=1 << bits).astype(np.int64)
    if counts.size != 1 << bits:
        raise ValueError(f"codes exceed the {bits}-bit range")
    return Histogram(counts)


def min_entropy(hist: Histogram) -> EntropyEstimate:
    """``-log2`` of the empirical maximum probability."""
    total = hist.total
    peak = int(hist.counts.max())
    # -log2(peak / total) computed as a difference of logs keeps h exact for powers of two
    h = math.log2(total) - math.log2(peak)
    return EntropyEstimate(max(h, 0.0), peak / total, total)


@dataclass(frozen=True)
class StabilityReport:
    segments: list[EntropyEstimate]
    spread: float


def segment_stability(blocks, min_samples: int = MIN_SEGMENT_SAMPLES) -> StabilityReport:
    """Per-segment min-entropy and its max - min spread."""
    blocks = list(blocks)
    if len(blocks) < 2:
        raise ValueError("stability needs at least two segments")
    estimates = []
    for i, b in enumerate(blocks):
        if len(b) < min_samples:
            raise ValueError(f"segment {i} holds {len(b)} samples, fewer than {min_samples}")
        estimates.append(min_entropy(histogram(b)))
    hs = [e.h_min_per_symbol for e in estimates]
    return StabilityReport(estimates, max(hs) - min(hs))


def write_histogram_csv(hist: Histogram, path: str | Path) -> None:
    lines = ["code,count"] + [f"{code},{int(c)}" for code, c in enumerate(hist.counts)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_histogram_csv(path: str | Path) -> Histogram:
    rows = np.loadtxt(path, delimiter=",", skiprows=1, dtype=np.int64, ndmin=2)
    counts = np.zeros(int(rows[:, 0].max()) + 1, dtype=np.int64)
    counts[rows[:, 0]] = rows[:, 1]
    return Histogram(counts)
