#!/usr/bin/env python3
"""Compare the jitted kernels against the interpreted fallback.

The script re-invokes itself twice, once with RANKEDCOAL_NO_NUMBA unset
and once with it set, so each backend is fixed at import time in a
fresh process. Kernels are warmed before timing (compilation happens in
the warm-up call); the table reports the best wall time per kernel.

Usage: python3 benchmarks/bench_backends.py [--repeat 3]
"""

import argparse
import json
import os
import subprocess
import sys
import time


def _best_ms(fn, repeat):
    fn()
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best * 1000.0


def run_worker(repeat):
    from rankedcoal._accel import HAS_NUMBA
    from rankedcoal.betasplit import BetaConfig, sample_beta_stats
    from rankedcoal.frechet import mean_matrix_exact, vitreebi
    from rankedcoal.kingman import edge_table, sample_paths
    from rankedcoal.statespace import enumerate_states

    print(json.dumps({"backend": "numba" if HAS_NUMBA else "numpy"}), flush=True)

    space18 = enumerate_states(18)
    table18 = edge_table(space18)
    space20 = enumerate_states(20)
    mean20 = mean_matrix_exact(space20, mode="float")
    config = BetaConfig(beta=-1.0, n=25, seed=7)

    cases = [
        ("enumerate_states, n = 22", lambda: enumerate_states(22)),
        ("sample_paths, n = 18, 20000 draws",
         lambda: sample_paths(space18, 20000, 11, table=table18)),
        ("sample_beta_stats, n = 25, 2000 trees",
         lambda: sample_beta_stats(config, 2000)),
        ("vitreebi, n = 20, float", lambda: vitreebi(space20, mean20)),
    ]
    for name, fn in cases:
        print(json.dumps({"kernel": name, "ms": _best_ms(fn, repeat)}), flush=True)


def run_parent(repeat):
    results = {}
    backends = {}
    for label, flag in (("numba", None), ("numpy", "1")):
        env = os.environ.copy()
        env.pop("RANKEDCOAL_NO_NUMBA", None)
        if flag is not None:
            env["RANKEDCOAL_NO_NUMBA"] = flag
        proc = subprocess.run(
            [sys.executable, os.path.abspath(__file__),
             "--worker", "--repeat", str(repeat)],
            env=env, capture_output=True, text=True, check=True,
        )
        rows = [json.loads(line) for line in proc.stdout.splitlines() if line.strip()]
        backends[label] = rows[0]["backend"]
        results[label] = {row["kernel"]: row["ms"] for row in rows[1:]}
    if backends["numba"] != "numba":
        print("note: numba is unavailable, both columns ran the interpreted path")
    width = max(len(name) for name in results["numba"])
    print(f"{'kernel':<{width}}  {'numba ms':>9}  {'numpy ms':>9}  {'speedup':>8}")
    for kernel, jitted in results["numba"].items():
        plain = results["numpy"][kernel]
        print(f"{kernel:<{width}}  {jitted:>9.2f}  {plain:>9.2f}  {plain / jitted:>7.1f}x")


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3,
                        help="timed repetitions per kernel (default 3)")
    parser.add_argument("--worker", action="store_true", help=argparse.SUPPRESS)
    args = parser.parse_args(argv)
    if args.repeat < 1:
        parser.error("--repeat must be at least 1")
    if args.worker:
        run_worker(args.repeat)
    else:
        run_parent(args.repeat)
    return 0


if __name__ == "__main__":
    sys.exit(main())
