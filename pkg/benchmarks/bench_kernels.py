"""Time the compiled kernels against the numpy fallback.

Usage::

    python benchmarks/bench_kernels.py --m 16 --T 20000 --d 500
"""
import argparse
import json
import time

import numpy as np

from consensus_sgd import _backend
from consensus_sgd.data import split_uniform, synth_controlled_rho
from consensus_sgd.engine import RunConfig, Seeds, run
from consensus_sgd.objective import LossSpec, Objective
from consensus_sgd.recipes import mixing_for
from consensus_sgd.reference import sdca_optimum
from consensus_sgd.schedules import Constant, IidBernoulli


def best_of(fn, repeats):
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - start)
    return min(times), out


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--m", type=int, default=16)
    p.add_argument("--T", type=int, default=20_000)
    p.add_argument("--N", type=int, default=50_000)
    p.add_argument("--d", type=int, default=500)
    p.add_argument("--rho-sq", type=float, default=0.05)
    p.add_argument("--mu", type=float, default=1e-2)
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--json", help="write results here")
    args = p.parse_args(argv)

    if not _backend.compiled_available():
        raise SystemExit("compiled extension not built; run `pip install --no-build-isolation -e .` first")
    data = synth_controlled_rho(args.N, args.d, args.rho_sq, seed=0)
    shards = split_uniform(data, args.m, 0)
    P = mixing_for(args.m)
    loss = LossSpec.hinge()
    results = []
    for label, sched in (("constant", Constant(P)), ("iid nu=0.1", IidBernoulli(P, 0.1))):
        cfg = RunConfig(args.m, args.T, args.mu, loss, sched, Seeds(0, 0, 0), record_objective=False, record_last=False)
        row = {"kernel": f"consensus_rounds ({label})"}
        finals = {}
        for name in ("compiled", "python"):
            row[name], tr = best_of(lambda: run(cfg, shards, backend=name), args.repeats)
            finals[name] = tr.iterates
        row["max_abs_diff"] = float(np.abs(finals["compiled"] - finals["python"]).max())
        results.append(row)

    obj = Objective(loss, args.mu, data)
    row = {"kernel": "sdca (to 1e-8 duality gap)"}
    for name in ("compiled", "python"):
        row[name], ref = best_of(lambda: sdca_optimum(obj, tol=1e-8, backend=name), 1)
        row[f"J_{name}"] = ref.J_star
    row["max_abs_diff"] = abs(row.pop("J_compiled") - row.pop("J_python"))
    results.append(row)

    print(f"{'kernel':<34} {'compiled s':>11} {'python s':>10} {'speedup':>8} {'max diff':>10}")
    for r in results:
        print(f"{r['kernel']:<34} {r['compiled']:11.3f} {r['python']:10.3f} {r['python'] / r['compiled']:8.1f} "
              f"{r['max_abs_diff']:10.1e}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump({"args": vars(args), "results": results}, fh, indent=2)


if __name__ == "__main__":
    main()
