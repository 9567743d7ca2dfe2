#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-numpy fallback.

Times the three hot operations (quantize_block, apply_codes, mix_replicas)
at a few problem sizes with both implementations loaded side by side, then
times one full engine run per backend in subprocesses (backend choice is
fixed at import, so the end-to-end comparison needs fresh interpreters).

Usage: python scripts/benchmark_kernels.py [--repeats 200] [--rounds 400]
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from aqtrack._kernels import _fallback

try:
    from aqtrack._kernels import _speedups
except ImportError:
    _speedups = None


def _time(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_kernels(repeats):
    rng = np.random.default_rng(0)
    rows = []
    for N, r in ((5, 2), (20, 4), (80, 8)):
        scaled = rng.normal(0.0, 40.0, N * r)
        codes = np.empty(N * r, dtype=np.int64)
        R = rng.normal(size=(N, N, r))
        A = np.full((N, N), 1.0 / N)
        out = np.empty((N, r))
        code_grid = rng.integers(-100, 101, size=(N, r)).astype(np.int64)

        cases = {
            "quantize_block": lambda impl: impl.quantize_block(scaled, 100, codes),
            "apply_codes": lambda impl: impl.apply_codes(R, code_grid, 0.25),
            "mix_replicas": lambda impl: impl.mix_replicas(A, R, out),
        }
        for name, call in cases.items():
            t_fb = _time(lambda: call(_fallback), repeats)
            t_sp = _time(lambda: call(_speedups), repeats) if _speedups else None
            rows.append((name, f"N={N} r={r}", t_fb, t_sp))
    return rows


_RUN_SNIPPET = """
import time
import numpy as np
import aqtrack as aq
from aqtrack import engine
from aqtrack._kernels import BACKEND
from aqtrack.codec import ScalingSchedule

p = aq.make_quadratic_synthetic(12, 4, 4, seed=3)
A = aq.build_ring(12, 0.5)
alpha = 0.9 * aq.alpha_upper_bound(p.mu, p.l1, p.l2, p.l3, A.kappa)
cfg = engine.RunConfig(
    alpha=alpha,
    schedule=ScalingSchedule(8.0, 0.98),
    levels_L=4000,
    max_rounds={rounds},
    x0=np.random.default_rng(1).uniform(-2, 2, 48),
)
t0 = time.perf_counter()
traj = engine.run(p, A, cfg)
print(BACKEND, time.perf_counter() - t0)
"""


def bench_engine(rounds):
    results = {}
    for env_val in (None, "1"):
        env = dict(os.environ)
        env.pop("AQTRACK_PURE", None)
        if env_val:
            env["AQTRACK_PURE"] = env_val
        out = subprocess.run(
            [sys.executable, "-c", _RUN_SNIPPET.format(rounds=rounds)],
            capture_output=True,
            text=True,
            env=env,
            check=True,
        ).stdout.split()
        results[out[0]] = float(out[1])
    return results


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=200)
    ap.add_argument("--rounds", type=int, default=400)
    args = ap.parse_args()

    if _speedups is None:
        print("compiled extension not built; timing the fallback alone\n")

    print(f"{'kernel':<16} {'size':<12} {'fallback':>12} {'compiled':>12} {'speedup':>9}")
    for name, size, t_fb, t_sp in bench_kernels(args.repeats):
        if t_sp is None:
            print(f"{name:<16} {size:<12} {t_fb * 1e6:>10.2f}us {'-':>12} {'-':>9}")
        else:
            print(
                f"{name:<16} {size:<12} {t_fb * 1e6:>10.2f}us "
                f"{t_sp * 1e6:>10.2f}us {t_fb / t_sp:>8.2f}x"
            )

    print(f"\nfull engine run, N=12 n=4 r=4, {args.rounds} rounds (fresh process each):")
    for backend, secs in sorted(bench_engine(args.rounds).items()):
        print(f"  {backend:<10} {secs:.3f}s")


if __name__ == "__main__":
    main()
