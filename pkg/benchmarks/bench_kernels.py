#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-Python fallback.

Times the three hot kernels head to head in-process, then a full referencing
calibration per backend in subprocesses (backend forced via
FLOORREF_PURE_PYTHON). Run from the repository root:

    python benchmarks/bench_kernels.py
"""

from __future__ import annotations

import os
import subprocess
import sys
import time

import numpy as np

from floorref._kernels import _ref

try:
    from floorref._kernels import _core
except ImportError:
    _core = None


def bench(fn, *args, repeat: int = 5, number: int = 1) -> float:
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        for _ in range(number):
            fn(*args)
        best = min(best, (time.perf_counter() - t0) / number)
    return best


def kernel_benchmarks() -> None:
    rng = np.random.default_rng(0)
    xy = rng.normal(scale=0.3, size=(200_000, 2))
    distorted = _ref.distort_radial(xy, -0.03, 0.0005, 0.0)
    cloud = rng.normal(size=(2_000, 2)) * 50.0

    cases = [
        ("distort_radial (200k pts)", "distort_radial", (xy, -0.03, 0.0005, 0.0)),
        ("undistort_radial (200k pts)", "undistort_radial", (distorted, -0.03, 0.0005, 0.0)),
        ("enclosing_circle (2k pts)", "enclosing_circle", (cloud,)),
    ]
    print(f"{'kernel':<30} {'python':>12} {'cython':>12} {'speedup':>9}")
    for label, name, args in cases:
        t_py = bench(getattr(_ref, name), *args)
        if _core is None:
            print(f"{label:<30} {t_py * 1e3:>10.2f}ms {'n/a':>12} {'n/a':>9}")
            continue
        t_cy = bench(getattr(_core, name), *args)
        print(
            f"{label:<30} {t_py * 1e3:>10.2f}ms {t_cy * 1e3:>10.2f}ms "
            f"{t_py / t_cy:>8.1f}x"
        )


PIPELINE_SNIPPET = """
import time
import floorref._kernels as kernels
from floorref.pipeline import compute_rob_h_cam
from floorref.simulate import GLASS_NOISE, default_placements, random_world, simulate_referencing_session

world = random_world(1)
placements = default_placements(world)
session = simulate_referencing_session(world, GLASS_NOISE, *placements)
compute_rob_h_cam(session)  # warm up
t0 = time.perf_counter()
n = 100
for trial in range(n):
    session = simulate_referencing_session(world, GLASS_NOISE, *placements, trial=trial)
    compute_rob_h_cam(session)
print(f"{kernels.BACKEND}: {(time.perf_counter() - t0) / n * 1e3:.2f} ms per calibration")
"""


def pipeline_benchmarks() -> None:
    print("\nfull referencing calibration (simulate + calibrate):")
    for pure in (False, True):
        env = dict(os.environ)
        if pure:
            env["FLOORREF_PURE_PYTHON"] = "1"
        else:
            env.pop("FLOORREF_PURE_PYTHON", None)
        out = subprocess.run(
            [sys.executable, "-c", PIPELINE_SNIPPET], capture_output=True, text=True, env=env
        )
        print(" ", out.stdout.strip() or out.stderr.strip())


if __name__ == "__main__":
    kernel_benchmarks()
    pipeline_benchmarks()
