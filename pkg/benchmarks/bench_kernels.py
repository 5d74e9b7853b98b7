"""Time the numba kernels against the pure-Python fallback.

The fallback runs in a child process with ``PNORMFLOW_DISABLE_NUMBA=1`` so
every kernel, including the ones called from inside other kernels, is the
plain Python version.

    python3 benchmarks/bench_kernels.py [--repeat 3] [--quick]
"""
from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np


def workloads(quick: bool):
    from pnormflow.clustering import sweep_cut
    from pnormflow.diffusion import make_problem, solve
    from pnormflow.synth import gen_dumbbell, gen_planted_partition

    pp, _ = gen_planted_partition([40] * 5, 0.3, 0.02, seed=1)
    db = gen_dumbbell(7, 7)
    budget = 2_000 if quick else 20_000

    def push_q2():
        return solve(make_problem(pp, [0], 40.0, 2.0)).pushes

    def coord_p4():
        return solve(make_problem(pp, [0], 40.0, 4.0, budget=budget), seed=0).pushes

    def coord_p4_fixed():
        prob = make_problem(db, [24], 121 / 4, 4.0, budget=budget)
        return solve(prob, seed=0, line_search=False).pushes

    x = np.random.default_rng(0).random(pp.n)
    x[x < 0.2] = 0.0

    def sweep():
        return len(sweep_cut(pp, x).profile)

    return {"push q=2": push_q2, "coord p=4 line search": coord_p4,
            "coord p=4 fixed step": coord_p4_fixed, "sweep cut": sweep}


def measure(repeat: int, quick: bool) -> dict:
    from pnormflow import _accel

    out = {"numba": _accel.USE_NUMBA, "times": {}, "work": {}}
    for name, fn in workloads(quick).items():
        out["work"][name] = fn()  # warm-up, includes compilation
        best = float("inf")
        for _ in range(repeat):
            t0 = time.perf_counter()
            fn()
            best = min(best, time.perf_counter() - t0)
        out["times"][name] = best
    return out


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--quick", action="store_true", help="smaller push budgets")
    ap.add_argument("--worker", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args(argv)
    if args.worker:
        print(json.dumps(measure(args.repeat, args.quick)))
        return 0

    jit = measure(args.repeat, args.quick)
    if not jit["numba"]:
        print("numba disabled in this process; unset PNORMFLOW_DISABLE_NUMBA", file=sys.stderr)
        return 1
    env = dict(os.environ, PNORMFLOW_DISABLE_NUMBA="1")
    cmd = [sys.executable, __file__, "--worker", "--repeat", str(args.repeat)]
    if args.quick:
        cmd.append("--quick")
    py = json.loads(subprocess.run(cmd, env=env, capture_output=True, text=True,
                                   check=True).stdout)
    print(f"{'workload':<24}{'work':>8}{'numba s':>12}{'python s':>12}{'speedup':>10}")
    for name, t in jit["times"].items():
        if jit["work"][name] != py["work"][name]:
            print(f"warning: {name} did different work on the two paths", file=sys.stderr)
        tp = py["times"][name]
        print(f"{name:<24}{jit['work'][name]:>8}{t:>12.4f}{tp:>12.4f}{tp / t:>9.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
