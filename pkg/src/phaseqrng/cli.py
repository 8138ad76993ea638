"""``phaseqrng`` command line.

Subcommands share ``--config PATH``, ``--seed U64``, ``--out DIR`` and
``--samples N``; command-line values override the config file. Errors exit
with status 2 and a ``[stage] message`` line on stderr.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np

from . import kernels
from .detection import calibrate, quantize, read_samples, write_samples
from .entropy import histogram, min_entropy, write_histogram_csv
from .laser import read_trace_csv, write_trace_csv
from .pipeline import (
    PipelineConfig,
    PipelineError,
    bench_csv,
    benchmark_extractor,
    run_pipeline,
    simulate_trace,
    theoretical_rate,
)
from .randomness import run_tests, write_report
from .rng import derive_seed
from .toeplitz import output_length, read_bits, read_seed, stream_extract, write_bits


def _config(args) -> PipelineConfig:
    cfg = PipelineConfig.load(args.config) if args.config else PipelineConfig()
    overrides = {}
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if args.out is not None:
        overrides["output_dir"] = args.out
    if args.samples is not None:
        overrides["sample_count"] = args.samples
    cfg = dataclasses.replace(cfg, **overrides)
    cfg.validate(require_block=args.command == "pipeline")
    return cfg


def _outdir(cfg: PipelineConfig) -> Path:
    root = Path(cfg.output_dir)
    root.mkdir(parents=True, exist_ok=True)
    return root


def _meta(path: Path, cfg: PipelineConfig, stage: str, **extra) -> None:
    items = {"file": path.name, "stage": stage, "config_sha256": cfg.digest(),
             "master_seed": cfg.master_seed, "kernel_backend": kernels.BACKEND, **extra}
    path.with_name(path.name + ".meta").write_text("".join(f"{k} = {v}\n" for k, v in items.items()))


def cmd_simulate(args, cfg):
    theta = cfg.resolved_static_phase()
    trace = simulate_trace(cfg, theta)
    path = _outdir(cfg) / "trace.csv"
    write_trace_csv(trace, path)
    _meta(path, cfg, "simulate", static_phase_rad=repr(theta), samples=len(trace))
    print(f"wrote {len(trace)} intensity samples to {path}")


def cmd_quantize(args, cfg):
    trace = read_trace_csv(args.input, 1.0 / cfg.sample_rate_hz)
    cal = calibrate(trace, cfg.k_sigma)
    block = quantize(trace, cal)
    path = _outdir(cfg) / "samples.bin"
    write_samples(block, path)
    _meta(path, cfg, "quantize", v_min=repr(cal.v_min), v_max=repr(cal.v_max),
          bits=cal.bits, clip_count=block.clip_count)
    print(f"wrote {len(block)} codes to {path}; clipped {block.clip_count}")


def cmd_entropy(args, cfg):
    hist = histogram(read_samples(args.input))
    est = min_entropy(hist)
    root = _outdir(cfg)
    hist_path = root / "histogram.csv"
    write_histogram_csv(hist, hist_path)
    _meta(hist_path, cfg, "entropy", h_min_per_symbol=repr(est.h_min_per_symbol))
    (root / "entropy.txt").write_text(
        f"h_min_per_symbol = {est.h_min_per_symbol!r}\nmax_prob = {est.max_prob!r}\n"
        f"sample_count = {est.sample_count}\n"
        f"theoretical_rate_bps = {theoretical_rate(cfg.sample_rate_hz, est.h_min_per_symbol)!r}\n"
    )
    print(f"min-entropy {est.h_min_per_symbol:.4f} bits/sample over {est.sample_count} samples")


def cmd_extract(args, cfg):
    codes = read_samples(args.input)
    h = args.h_min if args.h_min is not None else min_entropy(histogram(codes)).h_min_per_symbol
    n = cfg.extractor_n
    seed_bits = None
    if args.seed_file:
        seed_bits = read_seed(args.seed_file, n, output_length(n, h, 8, cfg.epsilon_log2))
    result = stream_extract(codes, n, h, epsilon_log2=cfg.epsilon_log2, seed_bits=seed_bits,
                            seed_policy=cfg.seed_policy,
                            rng_seed=derive_seed(cfg.master_seed, "extract"))
    root = _outdir(cfg)
    path = root / "extracted.bin"
    write_bits(result.bits, path)
    _meta(path, cfg, "extract", n=n, m=result.m, blocks=result.blocks, bits=result.bits.size)
    if seed_bits is None:
        write_bits(np.concatenate(result.seeds), root / "seed.bin")
    print(f"extracted {result.bits.size} bits from {result.blocks} blocks (n={n}, m={result.m})")


def cmd_test(args, cfg):
    bits = read_bits(args.input, args.bits)
    report = run_tests(bits, cfg.p_low, cfg.p_high, cfg.ks_block_bits)
    write_report(report, _outdir(cfg) / "tests")
    sys.stdout.write(report.to_text())
    if args.strict and not report.passed:
        raise PipelineError("test", "one or more tests outside the p-value window")


def cmd_pipeline(args, cfg):
    report = run_pipeline(cfg)
    sys.stdout.write(report.to_text())
    sys.stdout.write(report.timings_text())


def cmd_bench(args, cfg):
    shapes = []
    for n in args.sizes:
        m = output_length(n, args.h_min, 8, 0)
        shapes.append((n, m))
    rows = benchmark_extractor(shapes, repeats=args.repeats, naive_max_n=args.naive_max_n,
                               rng_seed=cfg.master_seed)
    text = bench_csv(rows)
    (_outdir(cfg) / "bench.csv").write_text(text)
    sys.stdout.write(text)


def _sizes(text: str) -> list[int]:
    return [int(float(s)) for s in text.split(",") if s.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="key = value config file")
    common.add_argument("--seed", type=int, metavar="U64", help="master seed")
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument("--samples", type=int, metavar="N", help="ADC sample count")

    parser = argparse.ArgumentParser(prog="phaseqrng", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("simulate", parents=[common], help="write an intensity trace CSV")
    p = sub.add_parser("quantize", parents=[common], help="trace CSV to raw 8-bit samples")
    p.add_argument("--input", required=True)
    p = sub.add_parser("entropy", parents=[common], help="histogram and min-entropy of samples")
    p.add_argument("--input", required=True)
    p = sub.add_parser("extract", parents=[common], help="Toeplitz extraction of raw samples")
    p.add_argument("--input", required=True)
    p.add_argument("--h-min", type=float, help="min-entropy per sample (default: estimate)")
    p.add_argument("--seed-file", help="packed Toeplitz seed, MSB-first")
    p = sub.add_parser("test", parents=[common], help="ENT / monobit / runs on a bit file")
    p.add_argument("--input", required=True)
    p.add_argument("--bits", type=int, help="number of valid bits (default: whole file)")
    p.add_argument("--strict", action="store_true", help="exit nonzero when a test fails")
    sub.add_parser("pipeline", parents=[common], help="run every stage")
    p = sub.add_parser("bench", parents=[common], help="naive vs fast extractor throughput")
    p.add_argument("--sizes", type=_sizes, default=[2048, 65536, 500_000, 5_000_000])
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--h-min", type=float, default=6.27)
    p.add_argument("--naive-max-n", type=int, default=500_000)
    return parser


COMMANDS = {
    "simulate": cmd_simulate,
    "quantize": cmd_quantize,
    "entropy": cmd_entropy,
    "extract": cmd_extract,
    "test": cmd_test,
    "pipeline": cmd_pipeline,
    "bench": cmd_bench,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _config(args)
    except (OSError, ValueError) as exc:
        print(f"[config] {exc}", file=sys.stderr)
        return 2
    try:
        COMMANDS[args.command](args, cfg)
    except PipelineError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    except (OSError, ValueError, ArithmeticError) as exc:
        print(f"[{args.command}] {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
