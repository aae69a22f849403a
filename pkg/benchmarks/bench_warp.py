#!/usr/bin/env python3
"""Benchmark the compiled warp kernel against the NumPy fallback.

Usage: python3 benchmarks/bench_warp.py [--repeats N]

Covers the two hot call sites: augmentation warps (rotation/zoom/shift on
native-size images) and preprocessing resizes to the backbone input size.
Both backends produce bit-identical output, which is asserted here too.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from pestid import kernels


def time_call(fn, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def workloads(rng):
    rotate = np.array([0.966, -0.259, 20.0, 0.259, 0.966, -15.0])
    for h, w in ((224, 224), (512, 512), (768, 1024)):
        image = rng.integers(0, 256, size=(h, w, 3)).astype(np.uint8)
        yield f"warp {h}x{w} uint8", lambda impl, im=image: kernels.affine_warp(
            im, rotate, impl=impl)
    big = rng.integers(0, 256, size=(750, 1000, 3)).astype(np.uint8)
    yield "resize 750x1000 -> 224", lambda impl: kernels.resize_bilinear(
        big.astype(np.float32), 224, 224, impl=impl)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    impls = kernels.backends()
    if "compiled" not in impls:
        print("compiled kernel not available; rebuild with "
              "`pip install -e . --no-build-isolation`")
        return

    rng = np.random.default_rng(0)
    print(f"{'workload':28s} {'python':>10s} {'compiled':>10s} {'speedup':>8s}")
    for name, call in workloads(rng):
        outputs = {key: call(impl) for key, impl in impls.items()}
        assert np.array_equal(outputs["python"], outputs["compiled"]), name
        py = time_call(lambda: call(impls["python"]), args.repeats)
        cy = time_call(lambda: call(impls["compiled"]), args.repeats)
        print(f"{name:28s} {py * 1e3:9.2f}ms {cy * 1e3:9.2f}ms {py / cy:7.1f}x")


if __name__ == "__main__":
    main()
