"""Benchmark: compiled kernels vs the NumPy fallback on the prosody hot
loops (frame autocorrelation, loudness block power, activity-frame RMS).

Usage: python benchmarks/bench_kernels.py [--seconds 30] [--sr 16000]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from trace_eval.acoustics import kernels_numpy

try:
    from trace_eval.acoustics import _kernels
except ImportError:
    _kernels = None


def signal(seconds: float, sr: int) -> np.ndarray:
    rng = np.random.default_rng(0)
    t = np.arange(int(seconds * sr)) / sr
    return (0.4 * np.sin(2 * np.pi * 170.0 * t)
            + 0.1 * np.sin(2 * np.pi * 420.0 * t)
            + 0.02 * rng.standard_normal(t.shape[0]))


def bench(fn, *args, repeats: int = 3) -> float:
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--seconds", type=float, default=30.0)
    parser.add_argument("--sr", type=int, default=16000)
    args = parser.parse_args()

    x = signal(args.seconds, args.sr)
    frame = int(0.040 * args.sr)
    hop = int(0.010 * args.sr)
    n_lags = int(np.ceil(args.sr / 60.0)) + 2
    block = int(0.400 * args.sr)
    block_hop = block // 4
    rms_frame = int(0.010 * args.sr)

    cases = [
        ("frame_autocorr", (x, frame, hop, n_lags)),
        ("block_mean_square", (x, block, block_hop)),
        ("frame_rms", (x, rms_frame)),
    ]
    print(f"signal: {args.seconds:.0f}s @ {args.sr} Hz "
          f"({x.shape[0]} samples)")
    header = f"{'kernel':<20}{'numpy (ms)':>12}{'cython (ms)':>13}{'speedup':>9}"
    print(header)
    print("-" * len(header))
    for name, call_args in cases:
        numpy_t = bench(getattr(kernels_numpy, name), *call_args)
        if _kernels is None:
            print(f"{name:<20}{numpy_t * 1e3:>12.2f}{'n/a':>13}{'n/a':>9}")
            continue
        cython_t = bench(getattr(_kernels, name), *call_args)
        out_a = getattr(kernels_numpy, name)(*call_args)
        out_b = getattr(_kernels, name)(*call_args)
        assert np.allclose(out_a, out_b, rtol=1e-8, atol=1e-9), name
        print(f"{name:<20}{numpy_t * 1e3:>12.2f}{cython_t * 1e3:>13.2f}"
              f"{numpy_t / cython_t:>9.2f}x")
    if _kernels is None:
        print("compiled kernels not built; showing fallback only")


if __name__ == "__main__":
    main()
