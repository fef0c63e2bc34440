"""Benchmark the hot kernels on the numba backend vs the pure-numpy fallback.

Usage:
    python benchmarks/bench_backends.py [--side 256] [--repeats 20]

Times the toy extractor (conv stack) and bilinear rotation per backend,
reports the speedup, and cross-checks that both backends return identical
bytes (they share one accumulation order, so agreement is exact).
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from skymatch import accel
from skymatch.core import ImageBuffer
from skymatch.features import ToyExtractorConfig, extract
from skymatch.spatial import RotationPolicy, rotate


def time_call(fn, repeats: int) -> float:
    fn()  # warm-up (JIT compile on the numba backend)
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - t0) / repeats


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--side", type=int, default=256, help="test image side length")
    parser.add_argument("--repeats", type=int, default=20)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    img = ImageBuffer(rng.integers(0, 256, size=(args.side, args.side, 3), dtype=np.uint8))
    cfg = ToyExtractorConfig(seed=args.seed)
    policy = RotationPolicy(interpolation="bilinear")

    backends = ["numpy"] + (["numba"] if accel.HAVE_NUMBA else [])
    if len(backends) == 1:
        print("numba not importable; timing the numpy fallback only")

    cases = {
        "extract (3-stage conv)": lambda: extract(img, cfg),
        "rotate (bilinear 33.3 deg)": lambda: rotate(img, 33.3, policy),
    }

    timings: dict[str, dict[str, float]] = {name: {} for name in cases}
    outputs: dict[str, dict[str, bytes]] = {name: {} for name in cases}
    for backend in backends:
        accel.set_backend(backend)
        for name, fn in cases.items():
            timings[name][backend] = time_call(fn, args.repeats)
            result = fn()
            data = result.data if hasattr(result, "data") else result
            outputs[name][backend] = np.asarray(data).tobytes()
    accel.set_backend(None)

    width = max(len(n) for n in cases)
    header = f"{'kernel'.ljust(width)}  " + "  ".join(f"{b:>12}" for b in backends)
    if len(backends) == 2:
        header += f"  {'speedup':>8}  agree"
    print(f"side={args.side} repeats={args.repeats}")
    print(header)
    for name in cases:
        row = name.ljust(width) + "  "
        row += "  ".join(f"{timings[name][b] * 1e3:9.3f} ms" for b in backends)
        if len(backends) == 2:
            speedup = timings[name]["numpy"] / timings[name]["numba"]
            agree = outputs[name]["numpy"] == outputs[name]["numba"]
            row += f"  {speedup:7.1f}x  {'bit-exact' if agree else 'MISMATCH'}"
        print(row)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
