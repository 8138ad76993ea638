"""Compiled vs numpy kernel timings.

    python benchmarks/bench_kernels.py [--repeats 5] [--csv out.csv]

Runs both ``phaseqrng.kernels`` backends on identical inputs, checks their
outputs agree, and prints median wall-clock seconds and the speed-up.
Also times the two Toeplitz extractor paths through the active backend.
"""

import argparse
import statistics
import sys
import time

import numpy as np

from phaseqrng import kernels
from phaseqrng.laser import LoopConfig, sample_phase_path
from phaseqrng.pipeline import bench_csv, benchmark_extractor
from phaseqrng.toeplitz import _pack_words, output_length


def median_time(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def parity_case(n):
    gen = np.random.default_rng(n)
    m = output_length(n, 6.27, 8, 0)
    x = _pack_words(gen.integers(0, 2, n, dtype=np.uint8))
    seed = _pack_words(gen.integers(0, 2, n + m - 1, dtype=np.uint8), extra_words=2)
    return f"toeplitz_parity n={n} m={m}", lambda mod: mod.toeplitz_parity(seed, x, m)


def superpose_case(count):
    cfg = LoopConfig(static_phase_rad=0.7)
    phase = sample_phase_path(count + cfg.warmup_samples, cfg, rng_seed=1).samples
    args = (phase, cfg.delay_samples, cfg.truncation_order, cfg.amplitude_factor, cfg.static_phase_rad)
    return f"superpose samples={count}", lambda mod: mod.superpose(*args)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--csv", help="also write the kernel table as CSV")
    ap.add_argument("--skip-extractor", action="store_true")
    args = ap.parse_args(argv)

    if kernels.compiled is None:
        print("compiled extension not built; only the numpy backend is available", file=sys.stderr)

    cases = [parity_case(n) for n in (65_536, 500_000)]
    cases += [superpose_case(c) for c in (1_000_000, 4_000_000)]
    rows = ["kernel,numpy_s,cython_s,speedup"]
    for name, call in cases:
        ref = call(kernels.fallback)
        t_py = median_time(lambda: call(kernels.fallback), args.repeats)
        if kernels.compiled is None:
            rows.append(f"{name},{t_py:.6g},,")
            continue
        out = call(kernels.compiled)
        if not np.allclose(out, ref, rtol=1e-12, atol=0):
            raise SystemExit(f"{name}: backends disagree")
        t_c = median_time(lambda: call(kernels.compiled), args.repeats)
        rows.append(f"{name},{t_py:.6g},{t_c:.6g},{t_py / t_c:.2f}")

    table = "\n".join(rows) + "\n"
    sys.stdout.write(table)
    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write(table)

    if not args.skip_extractor:
        shapes = [(n, output_length(n, 6.27, 8, 0)) for n in (65_536, 500_000, 5_000_000)]
        sys.stdout.write("\n" + bench_csv(benchmark_extractor(shapes, repeats=args.repeats)))


if __name__ == "__main__":
    main()
