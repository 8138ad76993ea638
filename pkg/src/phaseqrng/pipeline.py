"""End-to-end runs: simulate, digitize, estimate, extract, test.

All randomness descends from ``master_seed`` through labelled streams
(``phaseqrng.rng``), so a config plus seed reproduces every output file.
"""

from __future__ import annotations

import dataclasses
import hashlib
import math
import statistics
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .detection import calibrate, quantize, write_samples
from .entropy import EntropyEstimate, histogram, min_entropy, write_histogram_csv
from .laser import DriftSpec, LoopConfig, inject_drift, lowpass, simulate, simulate_drifting
from .randomness import TestReport, run_tests, write_report
from .rng import derive_seed, stream, U64_MAX
from .toeplitz import (
    ToeplitzSpec,
    extract_fast,
    extract_naive,
    output_length,
    read_seed,
    stream_extract,
    write_bits,
)

STAGES = ("simulate", "quantize", "entropy", "extract", "test")


class PipelineError(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


@dataclass
class PipelineConfig:
    # loop; None static phase means "draw from the master seed"
    linewidth_hz: float = 5.5e6
    delay_s: float = 20e-9
    attenuation_db_per_pass: float = 0.3
    static_phase_rad: float | None = None
    truncation_order: int = 30
    sample_rate_hz: float = 80e9
    pd_cutoff_hz: float | None = None
    # slow drift; drift_kind "none" disables it
    drift_kind: str = "none"
    drift_phase_amplitude_rad: float = 0.0
    drift_linewidth_rel: float = 0.0
    drift_period_samples: int = 1_000_000
    drift_step_samples: int = 10_000
    # acquisition
    sample_count: int = 10_000_000
    k_sigma: float = 4.0
    # extraction; seed_source is "rng" or a seed file path
    extractor_n: int = 5_000_000
    epsilon_log2: int = 50
    seed_source: str = "rng"
    seed_policy: str = "fixed"
    # tests
    p_low: float = 0.01
    p_high: float = 0.99
    ks_block_bits: int = 1_000_000
    # run
    master_seed: int = 0
    output_dir: str = "out"

    def validate(self, require_block: bool = True) -> None:
        """Raise ``ValueError`` on invalid settings.

        ``require_block`` enforces that the samples fill one extraction block,
        which only matters when extraction runs on this config's samples.
        """
        self.loop_config(self.static_phase_rad or 0.0)
        if self.sample_count < 1:
            raise ValueError("sample_count must be >= 1")
        if self.extractor_n < 8 or self.extractor_n % 8:
            raise ValueError("extractor_n must be a positive multiple of 8")
        if require_block and self.sample_count * 8 < self.extractor_n:
            raise ValueError("sample_count * 8 must cover at least one extraction block")
        if self.seed_policy not in ("fixed", "fresh"):
            raise ValueError(f"unknown seed_policy {self.seed_policy!r}")
        if self.drift_kind not in ("none", "sinusoidal", "random_walk"):
            raise ValueError(f"unknown drift_kind {self.drift_kind!r}")
        if not 0 <= self.p_low < self.p_high <= 1:
            raise ValueError("need 0 <= p_low < p_high <= 1")
        if not 0 <= self.master_seed <= U64_MAX:
            raise ValueError("master_seed must be an unsigned 64-bit integer")
        if not self.k_sigma > 0:
            raise ValueError("k_sigma must be > 0")

    def loop_config(self, static_phase_rad: float) -> LoopConfig:
        return LoopConfig(
            linewidth_hz=self.linewidth_hz,
            delay_s=self.delay_s,
            attenuation_db_per_pass=self.attenuation_db_per_pass,
            static_phase_rad=static_phase_rad,
            truncation_order=self.truncation_order,
            sample_rate_hz=self.sample_rate_hz,
        )

    def resolved_static_phase(self) -> float:
        if self.static_phase_rad is not None:
            return self.static_phase_rad
        return float(stream(self.master_seed, "static-phase").random() * 2.0 * math.pi)

    def drift_spec(self) -> DriftSpec | None:
        if self.drift_kind == "none":
            return None
        return DriftSpec(
            kind=self.drift_kind,
            phase_amplitude_rad=self.drift_phase_amplitude_rad,
            linewidth_rel_amplitude=self.drift_linewidth_rel,
            period_samples=self.drift_period_samples,
            seed=derive_seed(self.master_seed, "drift"),
        )

    def serialize(self) -> str:
        lines = ["# phaseqrng pipeline config"]
        for f in dataclasses.fields(self):
            lines.append(f"{f.name} = {_format_value(getattr(self, f.name))}")
        return "\n".join(lines) + "\n"

    @classmethod
    def parse(cls, text: str) -> "PipelineConfig":
        types = {f.name: f.type for f in dataclasses.fields(cls)}
        values = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
            key, value = (s.strip() for s in line.split("=", 1))
            if key not in types:
                raise ValueError(f"line {lineno}: unknown key {key!r}")
            values[key] = _parse_value(types[key], value)
        return cls(**values)

    @classmethod
    def load(cls, path: str | Path) -> "PipelineConfig":
        return cls.parse(Path(path).read_text())

    def digest(self) -> str:
        """SHA-256 of the serialized config, excluding ``output_dir``."""
        body = "".join(line + "\n" for line in self.serialize().splitlines()
                       if not line.startswith("output_dir "))
        return hashlib.sha256(body.encode()).hexdigest()


def _format_value(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse_value(type_name: str, text: str):
    optional = "None" in type_name
    if optional and text.lower() in ("none", "random", ""):
        return None
    if type_name.startswith("int"):
        return int(float(text)) if "e" in text.lower() else int(text)
    if type_name.startswith("float"):
        return float(text)
    return text


def theoretical_rate(sample_rate_hz: float, h_min_per_symbol: float) -> float:
    """Extractable bits per second: sample rate times min-entropy per sample."""
    if not sample_rate_hz > 0 or not h_min_per_symbol >= 0:
        raise ValueError("sample_rate_hz must be > 0 and h_min_per_symbol >= 0")
    return sample_rate_hz * h_min_per_symbol


@dataclass
class RunReport:
    config_sha256: str
    master_seed: int
    static_phase_rad: float
    entropy: EntropyEstimate
    v_min: float
    v_max: float
    clip_count: int
    n: int
    m: int
    epsilon_log2: int
    blocks: int
    extracted_bits: int
    tests: TestReport
    theoretical_rate_bps: float
    stage_seconds: dict[str, float] = field(default_factory=dict)

    @property
    def stage_throughput(self) -> dict[str, float]:
        """Samples per second for simulate/quantize/entropy, input bits per second for extract."""
        work = {
            "simulate": self.entropy.sample_count,
            "quantize": self.entropy.sample_count,
            "entropy": self.entropy.sample_count,
            "extract": self.blocks * self.n,
            "test": self.extracted_bits,
        }
        return {k: work[k] / s for k, s in self.stage_seconds.items() if s > 0 and k in work}

    def to_text(self) -> str:
        """Deterministic key = value report; wall-clock figures are kept out."""
        e = self.entropy
        items = [
            ("config_sha256", self.config_sha256),
            ("master_seed", self.master_seed),
            ("static_phase_rad", repr(self.static_phase_rad)),
            ("sample_count", e.sample_count),
            ("h_min_per_symbol", repr(e.h_min_per_symbol)),
            ("max_prob", repr(e.max_prob)),
            ("adc.v_min", repr(self.v_min)),
            ("adc.v_max", repr(self.v_max)),
            ("adc.clip_count", self.clip_count),
            ("extract.n", self.n),
            ("extract.m", self.m),
            ("extract.epsilon_log2", self.epsilon_log2),
            ("extract.blocks", self.blocks),
            ("extract.bits", self.extracted_bits),
            ("theoretical_rate_bps", repr(self.theoretical_rate_bps)),
        ]
        head = "".join(f"{k} = {v}\n" for k, v in items)
        return head + "".join(f"tests.{line}\n" for line in self.tests.to_text().splitlines())

    def timings_text(self) -> str:
        lines = [f"seconds.{k} = {v!r}" for k, v in self.stage_seconds.items()]
        lines += [f"throughput.{k} = {v!r}" for k, v in self.stage_throughput.items()]
        return "\n".join(lines) + "\n"


class _Outputs:
    def __init__(self, root: Path, config: PipelineConfig):
        self.root = root
        self.written: list[Path] = []
        self.common = {
            "config_sha256": config.digest(),
            "master_seed": config.master_seed,
            "phaseqrng_version": __version__,
            "kernel_backend": kernels.BACKEND,
        }

    def path(self, name: str) -> Path:
        p = self.root / name
        self.written.append(p)
        return p

    def meta(self, target: Path, stage: str, **extra) -> None:
        items = {"file": target.name, "stage": stage, **self.common, **extra}
        p = target.with_name(target.name + ".meta")
        self.written.append(p)
        p.write_text("".join(f"{k} = {v}\n" for k, v in items.items()))

    def discard(self) -> None:
        for p in self.written:
            p.unlink(missing_ok=True)


def simulate_trace(config: PipelineConfig, static_phase: float):
    """Intensity trace for ``config`` with drift and the detector hook applied."""
    loop = config.loop_config(static_phase)
    phase_seed = derive_seed(config.master_seed, "phase")
    drift = config.drift_spec()
    if drift is None:
        trace = simulate(config.sample_count, loop, phase_seed)
    else:
        step = config.drift_step_samples
        count = -(-config.sample_count // step)
        configs = inject_drift(loop, drift, count, step)
        trace = simulate_drifting(configs, step, phase_seed)
        trace = type(trace)(trace.values[: config.sample_count], trace.dt_s)
    if config.pd_cutoff_hz is not None:
        trace = lowpass(trace, config.pd_cutoff_hz)
    return trace


def run_pipeline(config: PipelineConfig) -> RunReport:
    """Run every stage and write outputs to ``config.output_dir``.

    On failure the files written so far are removed and a
    :class:`PipelineError` naming the stage is raised.
    """
    stage = "config"
    try:
        config.validate()
    except ValueError as exc:
        raise PipelineError(stage, str(exc)) from exc
    root = Path(config.output_dir)
    root.mkdir(parents=True, exist_ok=True)
    out = _Outputs(root, config)
    seconds: dict[str, float] = {}

    try:
        cfg_path = out.path("config.txt")
        cfg_path.write_text(config.serialize())

        stage = "simulate"
        t0 = time.perf_counter()
        theta = config.resolved_static_phase()
        trace = simulate_trace(config, theta)
        seconds[stage] = time.perf_counter() - t0

        stage = "quantize"
        t0 = time.perf_counter()
        cal = calibrate(trace, config.k_sigma)
        block = quantize(trace, cal)
        del trace
        samples_path = out.path("samples.bin")
        write_samples(block, samples_path)
        out.meta(samples_path, stage, v_min=repr(cal.v_min), v_max=repr(cal.v_max),
                 bits=cal.bits, clip_count=block.clip_count, static_phase_rad=repr(theta))
        seconds[stage] = time.perf_counter() - t0

        stage = "entropy"
        t0 = time.perf_counter()
        hist = histogram(block)
        est = min_entropy(hist)
        hist_path = out.path("histogram.csv")
        write_histogram_csv(hist, hist_path)
        out.meta(hist_path, stage, h_min_per_symbol=repr(est.h_min_per_symbol))
        seconds[stage] = time.perf_counter() - t0

        stage = "extract"
        t0 = time.perf_counter()
        n = config.extractor_n
        m = output_length(n, est.h_min_per_symbol, cal.bits, config.epsilon_log2)
        seed_bits = None
        if config.seed_source != "rng":
            seed_bits = read_seed(config.seed_source, n, m)
        result = stream_extract(
            block.codes, n, est.h_min_per_symbol,
            epsilon_log2=config.epsilon_log2,
            seed_bits=seed_bits,
            seed_policy=config.seed_policy,
            rng_seed=derive_seed(config.master_seed, "extract"),
        )
        bits_path = out.path("extracted.bin")
        write_bits(result.bits, bits_path)
        out.meta(bits_path, stage, n=n, m=result.m, blocks=result.blocks,
                 bits=result.bits.size, seed_policy=config.seed_policy,
                 seed_source=config.seed_source)
        if config.seed_source == "rng":
            seed_path = out.path("seed.bin")
            write_bits(np.concatenate(result.seeds), seed_path)
            out.meta(seed_path, stage, n=n, m=result.m, seeds=len(result.seeds))
        seconds[stage] = time.perf_counter() - t0

        stage = "test"
        t0 = time.perf_counter()
        tests = run_tests(result.bits, config.p_low, config.p_high, config.ks_block_bits)
        write_report(tests, out.path("tests.txt"))
        out.written.append(root / "tests.csv")
        seconds[stage] = time.perf_counter() - t0

        report = RunReport(
            config_sha256=config.digest(),
            master_seed=config.master_seed,
            static_phase_rad=theta,
            entropy=est,
            v_min=cal.v_min,
            v_max=cal.v_max,
            clip_count=block.clip_count,
            n=n,
            m=result.m,
            epsilon_log2=config.epsilon_log2,
            blocks=result.blocks,
            extracted_bits=int(result.bits.size),
            tests=tests,
            theoretical_rate_bps=theoretical_rate(config.sample_rate_hz, est.h_min_per_symbol),
            stage_seconds=seconds,
        )
        out.path("report.txt").write_text(report.to_text())
        out.path("timings.txt").write_text(report.timings_text())
        return report
    except Exception as exc:
        out.discard()
        if isinstance(exc, PipelineError):
            raise
        raise PipelineError(stage, str(exc)) from exc


@dataclass(frozen=True)
class BenchRow:
    n: int
    m: int
    backend: str
    kernel_backend: str
    repeats: int
    median_s: float
    min_s: float

    @property
    def bits_per_s(self) -> float:
        return self.n / self.median_s if self.median_s > 0 else math.inf


def _time(fn, repeats: int) -> list[float]:
    out = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        out.append(time.perf_counter() - t0)
    return out


def benchmark_extractor(shapes, repeats: int = 5, naive_max_n: int = 500_000,
                        rng_seed: int = 0) -> list[BenchRow]:
    """Median wall-clock time of each backend per ``(n, m)`` shape.

    The naive backend runs only for ``n <= naive_max_n``.
    """
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    rows = []
    for n, m in shapes:
        spec = ToeplitzSpec.random(n, m, rng_seed)
        x = stream(rng_seed, f"bench-input-{n}").integers(0, 2, n, dtype=np.uint8)
        backends = [("fast", extract_fast)]
        if n <= naive_max_n:
            backends.insert(0, ("naive", extract_naive))
        for name, fn in backends:
            times = _time(lambda: fn(spec, x), repeats)
            rows.append(BenchRow(n, m, name, kernels.BACKEND, repeats,
                                 statistics.median(times), min(times)))
    return rows


def bench_csv(rows: list[BenchRow]) -> str:
    lines = ["n,m,backend,kernel_backend,repeats,median_s,min_s,bits_per_s"]
    for r in rows:
        lines.append(f"{r.n},{r.m},{r.backend},{r.kernel_backend},{r.repeats},"
                     f"{r.median_s:.6g},{r.min_s:.6g},{r.bits_per_s:.6g}")
    return "\n".join(lines) + "\n"
