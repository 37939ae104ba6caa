"""Compiled kernels against the pure-Python fallback.

    python benchmarks/bench_kernels.py [--repeat 3] [--json out.json]

Both backends draw the same numbers, so each workload also asserts that the
outputs agree before timing is reported.
"""

from __future__ import annotations

import argparse
import json
import sys
import timeit

import numpy as np

from cmbp import _backend, presets
from cmbp.engine import one_step_many, simulate_trajectory
from cmbp.limit import euler_maruyama_terminal


def workloads():
    prom = presets.two_sex_promiscuous()
    mig = presets.uniform_migration()
    return {
        "promiscuous trajectory, 2000 generations": lambda b: simulate_trajectory(prom, 2000, 0, 1, backend=b).steps,
        "promiscuous trajectory, naive, 300 generations":
            lambda b: simulate_trajectory(prom, 300, 0, 1, naive=True, backend=b).steps,
        "uniform migration trajectory, 2000 generations":
            lambda b: simulate_trajectory(mig, 2000, 0, 1, backend=b).steps,
        "one step from (50, 10), 20000 draws":
            lambda b: one_step_many(prom, (50, 10), 20_000, np.random.default_rng(0), backend=b),
        "Euler-Maruyama, 200 paths x 1000 steps":
            lambda b: euler_maruyama_terminal(1.0, 2.0, 1.0, 1e-3, 0, 200, backend=b),
    }


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--json", default=None, help="also write the timings here")
    args = ap.parse_args(argv)
    if _backend.compiled is None:
        print("compiled kernels are not built; run `pip install -e . --no-build-isolation` first", file=sys.stderr)
        return 1
    rows = []
    print(f"{'workload':<50} {'python s':>10} {'compiled s':>11} {'speedup':>8}")
    for name, fn in workloads().items():
        if not np.array_equal(fn("python"), fn("compiled")):
            print(f"{name}: backends disagree", file=sys.stderr)
            return 1
        t_py = min(timeit.repeat(lambda: fn("python"), number=1, repeat=args.repeat))
        t_c = min(timeit.repeat(lambda: fn("compiled"), number=1, repeat=args.repeat))
        rows.append({"workload": name, "python_s": t_py, "compiled_s": t_c, "speedup": t_py / t_c})
        print(f"{name:<50} {t_py:>10.4f} {t_c:>11.4f} {t_py / t_c:>7.1f}x")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
