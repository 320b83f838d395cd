#!/usr/bin/env python3
"""Benchmark the numba-compiled kernels against the pure-numpy fallback.

Runs each workload in a child process, once with numba active and once with
SPINFLIP_NO_NUMBA=1 (the path selection happens at import time), and prints
the timing table with speedups.

    python benchmarks/bench_kernels.py [--repeat N]
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time

WORKLOADS = ["field_table", "rk4_spin", "rk4_bloch", "rk4_density", "em_ensemble"]


def run_workloads(repeat: int) -> dict[str, float]:
    import numpy as np

    from spinflip import TrajectoryDesign, gaas
    from spinflip import _kernels as K
    from spinflip.constants import HBAR, MU_B

    design = TrajectoryDesign.design(1.0, 0.15, gaas())
    m = design.mat
    args = (design.theta.coeff_array(), design.phi.coeff_array(), design.tf,
            design.b0, m.alpha, m.beta, m.eta)
    pref = 0.5 * m.g * MU_B
    psi0 = np.array([1.0, 0.0], dtype=complex)
    rho0 = np.array([[1.0, 0.0], [0.0, 0.0]], dtype=complex)
    r0 = np.array([0.0, 0.0, 1.0])
    ts = np.linspace(1e-5, 1 - 1e-5, 100_000)
    rng = np.random.default_rng(0)
    dw = rng.normal(0.0, 1e-2, (200, 10_000))

    tasks = {
        "field_table": lambda: K.b1_b2_grid(ts, *args, 0.0, 0.0),
        "rk4_spin": lambda: K.rk4_spin(*args, pref, HBAR, psi0, 10_000),
        "rk4_bloch": lambda: K.rk4_bloch(*args, 0.01, 0.02, 1, r0, 10_000),
        "rk4_density": lambda: K.rk4_density(*args, pref, HBAR, 0.01, 0.02, 2,
                                             rho0, 10_000),
        "em_ensemble": lambda: K.em_ensemble(*args, pref, HBAR, 0.14, psi0,
                                             dw, 10_000),
    }
    results = {}
    for name in WORKLOADS:
        tasks[name]()  # warm-up / JIT
        best = float("inf")
        for _ in range(repeat):
            t0 = time.perf_counter()
            tasks[name]()
            best = min(best, time.perf_counter() - t0)
        results[name] = best
    results["numba"] = K.NUMBA_ENABLED
    return results


def child_main(repeat: int) -> None:
    print(json.dumps(run_workloads(repeat)))


def parent_main(repeat: int) -> None:
    timings = {}
    for label, extra_env in (("numba", {}), ("numpy", {"SPINFLIP_NO_NUMBA": "1"})):
        env = dict(os.environ)
        env.pop("SPINFLIP_NO_NUMBA", None)
        env.update(extra_env)
        proc = subprocess.run(
            [sys.executable, os.path.abspath(__file__), "--child",
             "--repeat", str(repeat)],
            capture_output=True, text=True, env=env, check=True)
        timings[label] = json.loads(proc.stdout.splitlines()[-1])
        expected = label == "numba"
        if timings[label].pop("numba") is not expected:
            raise RuntimeError(f"child for {label!r} picked the wrong path")

    width = max(len(w) for w in WORKLOADS)
    print(f"{'workload':<{width}}  {'numba':>10}  {'numpy':>10}  {'speedup':>8}")
    for name in WORKLOADS:
        fast, slow = timings["numba"][name], timings["numpy"][name]
        print(f"{name:<{width}}  {fast * 1e3:>8.2f}ms  {slow * 1e3:>8.2f}ms  "
              f"{slow / fast:>7.1f}x")


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--child", action="store_true")
    opts = ap.parse_args()
    if opts.child:
        child_main(opts.repeat)
    else:
        parent_main(opts.repeat)
