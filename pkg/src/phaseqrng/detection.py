"""Photodetection and ADC quantization."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .laser import IntensityTrace

DEFAULT_K_SIGMA = 4.0
MIN_CALIBRATION_SAMPLES = 1000


@dataclass(frozen=True)
class AdcCalibration:
    v_min: float
    v_max: float
    bits: int = 8

    def __post_init__(self):
        if not self.v_min < self.v_max:
            raise ValueError(f"v_min must be < v_max, got [{self.v_min}, {self.v_max}]")
        if not 1 <= self.bits <= 16:
            raise ValueError(f"bits must lie in [1, 16], got {self.bits}")

    @property
    def levels(self) -> int:
        return 1 << self.bits

    @property
    def lsb(self) -> float:
        return (self.v_max - self.v_min) / self.levels


@dataclass(frozen=True)
class SampleBlock:
    codes: np.ndarray
    calibration: AdcCalibration
    clip_count: int = 0

    def __post_init__(self):
        if self.codes.size and int(self.codes.max()) >= self.calibration.levels:
            raise ValueError("code outside the ADC range")
        if not 0 <= self.clip_count <= self.codes.size:
            raise ValueError("clip_count must lie in [0, len(codes)]")

    def __len__(self):
        return self.codes.size


def calibrate(trace: IntensityTrace, k_sigma: float = DEFAULT_K_SIGMA, bits: int = 8) -> AdcCalibration:
    """Full scale ``mean +/- k_sigma * std`` of the trace (population std)."""
    values = np.asarray(trace.values, dtype=np.float64)
    if values.size < MIN_CALIBRATION_SAMPLES:
        raise ValueError(f"calibration needs >= {MIN_CALIBRATION_SAMPLES} samples, got {values.size}")
    if not k_sigma > 0:
        raise ValueError(f"k_sigma must be > 0, got {k_sigma}")
    mu = float(values.mean())
    sigma = float(values.std())
    # std of a constant array can come out as a rounding residue, so test the range
    if values.max() == values.min() or not sigma > 0:
        raise ValueError("zero-variance trace: ADC calibration is undefined")
    return AdcCalibration(mu - k_sigma * sigma, mu + k_sigma * sigma, bits)


def quantize(trace: IntensityTrace, cal: AdcCalibration) -> SampleBlock:
    """Mid-rise floor quantizer clamped to ``[0, 2**bits - 1]``.

    Inputs at or below ``v_min`` and at or above ``v_max`` are counted as
    clipped.
    """
    values = np.asarray(trace.values, dtype=np.float64)
    top = cal.levels - 1
    scaled = np.floor((values - cal.v_min) / (cal.v_max - cal.v_min) * cal.levels)
    codes = np.clip(scaled, 0, top).astype(np.uint8 if cal.bits <= 8 else np.uint16)
    clipped = int(np.count_nonzero(values <= cal.v_min) + np.count_nonzero(values >= cal.v_max))
    return SampleBlock(codes, cal, clipped)


def dequantize(block: SampleBlock) -> np.ndarray:
    """Centre of each code's input interval."""
    cal = block.calibration
    return cal.v_min + (block.codes.astype(np.float64) + 0.5) * cal.lsb


def write_samples(block: SampleBlock, path: str | Path) -> None:
    """Raw bytes, one byte per 8-bit code, in time order."""
    if block.calibration.bits != 8:
        raise ValueError("raw sample files hold 8-bit codes only")
    Path(path).write_bytes(np.ascontiguousarray(block.codes, dtype=np.uint8).tobytes())


def read_samples(path: str | Path) -> np.ndarray:
    return np.frombuffer(Path(path).read_bytes(), dtype=np.uint8)
