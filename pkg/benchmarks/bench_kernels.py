"""Compare the compiled and numpy scan kernels.

    python3 benchmarks/bench_kernels.py [--items 32768] [--M 16] [--repeat 20]

Prints per-backend time per scanned item and checks that both backends
return identical distances.
"""

import argparse
import time

import numpy as np

from rairs.kernels import INVALID_ID, available_backends


def make_case(items: int, M: int, seed: int, invalid_frac: float = 0.05):
    rng = np.random.default_rng(seed)
    lut = rng.random((M, 16), dtype=np.float32)
    codes = rng.integers(0, 16, size=(items, M), dtype=np.uint8)
    ids = np.arange(items, dtype=np.uint64)
    ids[rng.random(items) < invalid_frac] = INVALID_ID
    return lut, codes, ids


def time_backend(mod, lut, codes, ids, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        mod.scan_codes(lut, codes, ids)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--items", type=int, default=32768)
    ap.add_argument("--M", type=int, default=16)
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    lut, codes, ids = make_case(args.items, args.M, args.seed)
    backends = available_backends()
    ref = None
    print(f"items={args.items} M={args.M} repeat={args.repeat}")
    for name, mod in sorted(backends.items()):
        dist, _ = mod.scan_codes(lut, codes, ids)
        if ref is None:
            ref = dist
        elif not np.array_equal(ref, dist):
            raise SystemExit(f"{name}: distances differ from the first backend")
        t = time_backend(mod, lut, codes, ids, args.repeat)
        print(f"{name:8s} {t * 1e3:9.3f} ms  {t / args.items * 1e9:8.2f} ns/item")
    if "cython" not in backends:
        print("compiled backend not built; only the numpy fallback was timed")


if __name__ == "__main__":
    main()
