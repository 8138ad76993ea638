"""Laser phase noise and the recirculating delay-loop interferometer.

The source field is ``exp(i phi(t))`` with unit amplitude, where ``phi`` is a
Wiener process whose increments over ``tau`` have variance
``2 pi linewidth tau``. The loop returns copies delayed by ``k`` loop delays,
each scaled by ``r**k`` with ``r = 10**(-att/20) / sqrt(2)`` and rotated by the
static per-pass phase ``-k theta``. The beam splitter contributes a factor
``i`` per cross coupling, so the detected field is ``direct - delayed`` and the
intensity is ``|direct - delayed|**2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy import signal

from . import kernels
from .rng import gaussian, stream

TWO_PI = 2.0 * math.pi

#: Operating point of the reference setup.
NOMINAL_LINEWIDTH_HZ = 5.5e6
NOMINAL_DELAY_S = 20e-9
NOMINAL_ATTENUATION_DB = 0.3
NOMINAL_SAMPLE_RATE_HZ = 80e9
DEFAULT_TRUNCATION = 30

_GRID_RTOL = 1e-9


@dataclass(frozen=True)
class LoopConfig:
    """Physical parameters of the source and delay loop."""

    linewidth_hz: float = NOMINAL_LINEWIDTH_HZ
    delay_s: float = NOMINAL_DELAY_S
    attenuation_db_per_pass: float = NOMINAL_ATTENUATION_DB
    static_phase_rad: float = 0.0
    truncation_order: int = DEFAULT_TRUNCATION
    sample_rate_hz: float = NOMINAL_SAMPLE_RATE_HZ

    def __post_init__(self):
        if not self.linewidth_hz >= 0:
            raise ValueError(f"linewidth_hz must be >= 0, got {self.linewidth_hz}")
        if not self.delay_s > 0:
            raise ValueError(f"delay_s must be > 0, got {self.delay_s}")
        if not self.sample_rate_hz > 0:
            raise ValueError(f"sample_rate_hz must be > 0, got {self.sample_rate_hz}")
        if not math.isfinite(self.attenuation_db_per_pass):
            raise ValueError("attenuation_db_per_pass must be finite")
        if int(self.truncation_order) != self.truncation_order or self.truncation_order < 1:
            raise ValueError(f"truncation_order must be an integer >= 1, got {self.truncation_order}")
        if not 0.0 <= self.static_phase_rad < TWO_PI:
            raise ValueError(f"static_phase_rad must lie in [0, 2pi), got {self.static_phase_rad}")
        steps = self.delay_s * self.sample_rate_hz
        if round(steps) < 1 or abs(steps - round(steps)) > _GRID_RTOL * steps:
            raise ValueError(
                f"delay_s * sample_rate_hz = {steps!r} is not a positive integer; "
                "the loop delay must land on the sampling grid"
            )

    @property
    def dt_s(self) -> float:
        return 1.0 / self.sample_rate_hz

    @property
    def delay_samples(self) -> int:
        return int(round(self.delay_s * self.sample_rate_hz))

    @property
    def warmup_samples(self) -> int:
        """Samples of history needed before the first complete output."""
        return self.truncation_order * self.delay_samples

    @property
    def amplitude_factor(self) -> float:
        """Per-pass field factor ``r``."""
        return 10.0 ** (-self.attenuation_db_per_pass / 20.0) / math.sqrt(2.0)

    @property
    def power_factor(self) -> float:
        return self.amplitude_factor**2

    @property
    def step_variance(self) -> float:
        """Variance of one sampling-interval phase increment."""
        return TWO_PI * self.linewidth_hz / self.sample_rate_hz

    @property
    def lag_variance(self) -> float:
        """Variance of the phase difference across one loop delay."""
        return TWO_PI * self.linewidth_hz * self.delay_s


def wrap_phase(theta: float) -> float:
    """Reduce ``theta`` into ``[0, 2pi)``."""
    wrapped = math.fmod(theta, TWO_PI)
    if wrapped < 0:
        wrapped += TWO_PI
    # fmod of a value just below a multiple of 2pi can round up to 2pi
    return 0.0 if wrapped >= TWO_PI else wrapped


def residual_weight(config: LoopConfig) -> float:
    """Total amplitude weight ``sum_{k > N} r**k`` dropped by truncation."""
    r = config.amplitude_factor
    return r ** (config.truncation_order + 1) / (1.0 - r)


@dataclass(frozen=True)
class PhasePath:
    samples: np.ndarray
    dt_s: float

    def __len__(self):
        return len(self.samples)


@dataclass(frozen=True)
class IntensityTrace:
    values: np.ndarray
    dt_s: float

    def __len__(self):
        return len(self.values)


def sample_phase_path(count: int, config: LoopConfig, rng_seed: int) -> PhasePath:
    """Wiener phase path of ``count`` samples starting at zero.

    Increments are ``N(0, 2 pi linewidth / sample_rate)`` drawn from the
    ``"phase-path"`` stream of ``rng_seed``.
    """
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    increments = gaussian(stream(rng_seed, "phase-path"), count - 1)
    samples = np.empty(count)
    samples[0] = 0.0
    np.cumsum(increments * math.sqrt(config.step_variance), out=samples[1:])
    return PhasePath(samples, config.dt_s)


def _check_path(path: PhasePath, config: LoopConfig) -> np.ndarray:
    if abs(path.dt_s * config.sample_rate_hz - 1.0) > _GRID_RTOL:
        raise ValueError(f"path dt_s={path.dt_s} does not match sample_rate_hz={config.sample_rate_hz}")
    phi = np.ascontiguousarray(path.samples, dtype=np.float64)
    if phi.shape[0] <= config.warmup_samples:
        raise ValueError(
            f"path of {phi.shape[0]} samples is too short for truncation order "
            f"{config.truncation_order}: need more than {config.warmup_samples}"
        )
    return phi


def intensity_by_superposition(path: PhasePath, config: LoopConfig) -> IntensityTrace:
    """Detected intensity from the direct field minus the truncated loop sum.

    The first ``config.warmup_samples`` path samples only provide history, so
    the trace is that much shorter than the path.
    """
    phi = _check_path(path, config)
    values = kernels.superpose(
        phi,
        config.delay_samples,
        config.truncation_order,
        config.amplitude_factor,
        config.static_phase_rad,
    )
    return IntensityTrace(np.asarray(values), path.dt_s)


def intensity_by_expansion(path: PhasePath, config: LoopConfig) -> IntensityTrace:
    """Detected intensity from the closed-form cosine expansion.

    ``I = 1 + sum r^2k - 2 sum r^k cos(k theta + phi(t) - phi(t - kD))
    + 2 sum_{j<k} r^j r^k cos((k - j) theta + phi(t - jD) - phi(t - kD))``.
    Evaluated term by term; this is the independent check on
    :func:`intensity_by_superposition`, so it does not call the kernels.
    """
    phi = _check_path(path, config)
    order = config.truncation_order
    delay = config.delay_samples
    theta = config.static_phase_rad
    r = config.amplitude_factor
    warm = config.warmup_samples
    n_out = phi.shape[0] - warm
    lag = [phi[warm - k * delay: warm - k * delay + n_out] for k in range(order + 1)]

    values = np.full(n_out, 1.0 + sum(r ** (2 * k) for k in range(1, order + 1)))
    for k in range(1, order + 1):
        values -= 2.0 * r**k * np.cos(k * theta + lag[0] - lag[k])
    for k in range(2, order + 1):
        for j in range(1, k):
            values += 2.0 * r**k * r**j * np.cos((k - j) * theta + lag[j] - lag[k])
    return IntensityTrace(values, path.dt_s)


def lowpass(trace: IntensityTrace, cutoff_hz: float) -> IntensityTrace:
    """Single-pole detector response with -3 dB point ``cutoff_hz``.

    Optional hook; the default pipeline models an ideal detector.
    """
    if not cutoff_hz > 0:
        raise ValueError(f"cutoff_hz must be > 0, got {cutoff_hz}")
    alpha = -math.expm1(-TWO_PI * cutoff_hz * trace.dt_s)
    x = np.asarray(trace.values, dtype=np.float64)
    y, _ = signal.lfilter([alpha], [1.0, alpha - 1.0], x, zi=[x[0] * (1.0 - alpha)])
    return IntensityTrace(y, trace.dt_s)


@dataclass(frozen=True)
class DriftSpec:
    """Slow modulation of the static phase and the linewidth.

    ``kind`` is ``"sinusoidal"`` or ``"random_walk"``. For the sinusoid both
    parameters follow ``sin(2 pi t / period_samples)``; for the random walk
    ``period_samples`` is the time over which the RMS excursion reaches the
    amplitude, and excursions are reflected at the amplitude bounds.
    """

    kind: str = "sinusoidal"
    phase_amplitude_rad: float = 0.0
    linewidth_rel_amplitude: float = 0.0
    period_samples: int = 1_000_000
    seed: int = 0


MAX_RELATIVE_EXCURSION = 0.2
MAX_DRIFT_FRACTION_OF_LOOP_RATE = 0.01


def _reflect(x: np.ndarray, bound: float) -> np.ndarray:
    if bound == 0:
        return np.zeros_like(x)
    period = 4.0 * bound
    y = np.mod(x + bound, period)
    return np.where(y <= 2 * bound, y - bound, 3 * bound - y)


def inject_drift(config: LoopConfig, drift: DriftSpec, count: int, step_samples: int) -> list[LoopConfig]:
    """Configs at times ``0, step_samples, 2 * step_samples, ...``.

    Raises ``ValueError`` when an excursion exceeds 20 % (of 2 pi for the
    phase) or the drift rate exceeds 1 % of the loop circulation rate.
    """
    if count < 1 or step_samples < 1:
        raise ValueError("count and step_samples must be >= 1")
    if drift.kind not in ("sinusoidal", "random_walk"):
        raise ValueError(f"unknown drift kind {drift.kind!r}")
    if not 0 <= drift.linewidth_rel_amplitude <= MAX_RELATIVE_EXCURSION:
        raise ValueError(f"linewidth_rel_amplitude must lie in [0, {MAX_RELATIVE_EXCURSION}]")
    if not 0 <= drift.phase_amplitude_rad <= MAX_RELATIVE_EXCURSION * TWO_PI:
        raise ValueError(f"phase_amplitude_rad must lie in [0, {MAX_RELATIVE_EXCURSION} * 2pi]")
    if drift.period_samples < 1:
        raise ValueError("period_samples must be >= 1")
    drift_hz = config.sample_rate_hz / drift.period_samples
    if drift_hz > MAX_DRIFT_FRACTION_OF_LOOP_RATE / config.delay_s:
        raise ValueError(
            f"drift rate {drift_hz:.4g} Hz exceeds 1% of the loop rate {1.0 / config.delay_s:.4g} Hz"
        )

    t = np.arange(count, dtype=np.float64) * step_samples
    if drift.kind == "sinusoidal":
        wave = np.sin(TWO_PI * t / drift.period_samples)
        phase_dev = drift.phase_amplitude_rad * wave
        width_dev = drift.linewidth_rel_amplitude * wave
    else:
        gen = stream(drift.seed, "drift")
        scale = math.sqrt(step_samples / drift.period_samples)
        steps = gaussian(gen, 2 * count).reshape(2, count) * scale
        steps[:, 0] = 0.0
        walk = np.cumsum(steps, axis=1)
        phase_dev = _reflect(walk[0] * drift.phase_amplitude_rad, drift.phase_amplitude_rad)
        width_dev = _reflect(walk[1] * drift.linewidth_rel_amplitude, drift.linewidth_rel_amplitude)

    return [
        replace(
            config,
            static_phase_rad=wrap_phase(config.static_phase_rad + float(p)),
            linewidth_hz=config.linewidth_hz * (1.0 + float(w)),
        )
        for p, w in zip(phase_dev, width_dev)
    ]


def simulate_drifting(configs: list[LoopConfig], step_samples: int, rng_seed: int) -> IntensityTrace:
    """Intensity trace whose parameters follow ``configs`` piecewise.

    Config ``s`` governs output samples ``[s * step, (s + 1) * step)``: the
    phase increments feeding those samples use its linewidth and the loop
    sum uses its static phase. The phase path is continuous across steps.
    """
    if not configs:
        raise ValueError("configs must be non-empty")
    base = configs[0]
    for c in configs[1:]:
        if (c.delay_samples, c.truncation_order, c.sample_rate_hz, c.attenuation_db_per_pass) != (
            base.delay_samples, base.truncation_order, base.sample_rate_hz, base.attenuation_db_per_pass
        ):
            raise ValueError("drifting configs may only differ in linewidth and static phase")
    warm = base.warmup_samples
    total = warm + len(configs) * step_samples
    seg_of = np.clip((np.arange(1, total) - warm) // step_samples, 0, len(configs) - 1)
    sigma = np.sqrt(np.array([c.step_variance for c in configs]))[seg_of]
    phi = np.empty(total)
    phi[0] = 0.0
    np.cumsum(gaussian(stream(rng_seed, "phase-path"), total - 1) * sigma, out=phi[1:])

    out = np.empty(len(configs) * step_samples)
    for s, c in enumerate(configs):
        start = s * step_samples
        piece = PhasePath(phi[start:start + warm + step_samples], c.dt_s)
        out[start:start + step_samples] = intensity_by_superposition(piece, c).values
    return IntensityTrace(out, base.dt_s)


def simulate(count: int, config: LoopConfig, rng_seed: int) -> IntensityTrace:
    """``count`` intensity samples, generating the warm-up history internally."""
    path = sample_phase_path(count + config.warmup_samples, config, rng_seed)
    return intensity_by_superposition(path, config)


def write_trace_csv(trace: IntensityTrace, path: str | Path) -> None:
    np.savetxt(path, np.asarray(trace.values), fmt="%.12g")


def read_trace_csv(path: str | Path, dt_s: float) -> IntensityTrace:
    values = np.loadtxt(path, dtype=np.float64, ndmin=1)
    return IntensityTrace(values, dt_s)
