"""Benchmark the bilinear gather/scatter kernels: compiled extension vs
pure-numpy fallback.

Usage: python3 benchmarks/bench_warp.py [--size 512] [--planes 8] [--reps 5]
"""
import argparse
import importlib
import os
import subprocess
import sys
import time

import numpy as np


def bench(label, fn, reps):
    fn()  # warm up
    times = []
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    best = min(times)
    print(f"{label:34s} {best * 1e3:8.2f} ms")
    return best


def run(backend, size, planes, reps):
    os.environ["MPISOLVE_BACKEND"] = backend
    import mpisolve.kernels as kernels

    importlib.reload(kernels)
    assert kernels.BACKEND == backend, f"backend {backend} unavailable"

    rng = np.random.default_rng(0)
    src = rng.random((size, size, 4), dtype=np.float64)
    xs = rng.uniform(-1, size, (planes, size, size))
    ys = rng.uniform(-1, size, (planes, size, size))
    grad = rng.random((planes, size, size, 4))

    g = bench(f"gather  [{backend}] {planes}x{size}^2x4",
              lambda: kernels.bilinear_gather(src, xs, ys), reps)
    s = bench(f"scatter [{backend}] {planes}x{size}^2x4",
              lambda: kernels.bilinear_scatter(
                  grad.reshape(-1, size, 4), xs.reshape(-1, size),
                  ys.reshape(-1, size), size, size), reps)
    return g, s


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--size", type=int, default=512)
    parser.add_argument("--planes", type=int, default=8)
    parser.add_argument("--reps", type=int, default=5)
    parser.add_argument("--backend", choices=["both", "python", "cython"],
                        default="both")
    args = parser.parse_args()

    if args.backend != "both":
        run(args.backend, args.size, args.planes, args.reps)
        return

    # each backend in a fresh process so module state stays clean
    results = {}
    for backend in ("python", "cython"):
        out = subprocess.run(
            [sys.executable, __file__, "--backend", backend,
             "--size", str(args.size), "--planes", str(args.planes),
             "--reps", str(args.reps)],
            capture_output=True, text=True)
        if out.returncode != 0:
            print(f"{backend}: unavailable ({out.stderr.strip().splitlines()[-1]})")
            continue
        print(out.stdout, end="")
        times = [float(line.split()[-2]) for line in out.stdout.splitlines()]
        results[backend] = times
    if len(results) == 2:
        for i, op in enumerate(("gather", "scatter")):
            speedup = results["python"][i] / results["cython"][i]
            print(f"{op}: compiled kernel {speedup:.1f}x faster")


if __name__ == "__main__":
    main()
