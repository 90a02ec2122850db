"""Command-line entry point: ``consensus-sgd <command> ...`` or ``python -m consensus_sgd``.

Commands
--------
rho         spectral norm of a libsvm file's second-moment matrix
mixing      build a k-regular mixing matrix, print lambda_2, export CSV
run         one engine run from a JSON config; writes the trace CSV
bound       evaluate a suboptimality bound with its preconditions (JSON)
asymptotic  Lyapunov trace and asymptotic bounds for a smooth problem (JSON)
recipe      run a named experiment recipe
profile     N, d and rho^2 of dataset files next to the published values
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys

import numpy as np

from . import __version__
from .asymptotics import (
    MAX_DIM, PopulationSquaredObjective, asymptotic_node_bound, hessian_at, lyapunov_solve, noise_covariance_at,
    theorem6_bound,
)
from .bounds import BoundInputs, network_error_bound, regime_classify, theorem1_bound, theorem2_bound, theorem3_bound
from .data import GaussianStream, load_libsvm, normalize, parse_label_map, split_uniform
from .engine import RunConfig, Seeds, run
from .errors import UnsupportedError
from .objective import LossSpec, Objective
from .recipes import RECIPES, build_dataset, graph_degree, table1_profile
from .reference import reference_optimum
from .schedules import schedule_from_config
from .spectral import estimate_spectral_norm
from .topology import k_regular_graph, lambda2, lambda2_of_expected_square, max_degree_weights, uniform_neighbor_weights

log = logging.getLogger("consensus_sgd")


def _load_config(path):
    if path is None:
        return {}
    with open(path) as fh:
        return json.load(fh)


def _emit(obj, out_dir=None, name=None):
    text = json.dumps(obj, indent=2, sort_keys=True, default=_default)
    if out_dir is not None and name is not None:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, name), "w") as fh:
            fh.write(text + "\n")
    print(text)


def _default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o).__name__)


def _make_loss(kind, mu, rho_sq=None):
    if kind == "hinge":
        return LossSpec.hinge()
    if kind == "squared":
        return LossSpec.squared(mu=mu, rho_sq=rho_sq)
    raise SystemExit(f"unknown loss {kind!r}")


def cmd_rho(args):
    label_map = parse_label_map(args.label_map) if args.label_map else None
    data = normalize(load_libsvm(args.path, dimension=args.dimension, label_map=label_map))
    est = estimate_spectral_norm(data, tol=args.tol, max_iter=args.max_iter, seed=args.seed)
    out = data.metadata(est.rho_sq)
    out.update(iterations=est.iterations_used, residual=est.residual, normalize_noop=data.meta["normalize_noop"])
    _emit(out, args.out_dir, "rho.json")


def _mixing_matrix(m, k, weights):
    g = k_regular_graph(m, k)
    return max_degree_weights(g) if weights == "max-degree" else uniform_neighbor_weights(g)


def cmd_mixing(args):
    k = graph_degree(args.m) if args.k is None else args.k
    P = _mixing_matrix(args.m, k, args.weights)
    out = {"m": args.m, "k": k, "weights": args.weights, "lambda2": lambda2(P)}
    if args.nu is not None:
        from .schedules import IidBernoulli
        out["lambda2_expected_square"] = lambda2_of_expected_square(IidBernoulli(P, args.nu))
    if args.out_dir is not None:
        os.makedirs(args.out_dir, exist_ok=True)
        path = os.path.join(args.out_dir, f"mixing_m{args.m}_k{k}.csv")
        np.savetxt(path, P.weights, delimiter=",", fmt="%.17g")
        out["csv"] = path
    _emit(out)


def cmd_run(args):
    cfg = _load_config(args.config)
    if args.seed is not None:
        cfg["seeds"] = {"split": args.seed, "sampling": args.seed, "schedule": args.seed}
    data = build_dataset(cfg["dataset"])
    m = int(cfg.get("m", 16))
    mu = float(cfg.get("mu", 1e-3))
    est = estimate_spectral_norm(data)
    loss = _make_loss(cfg.get("loss", "hinge"), mu, est.rho_sq)
    P = _mixing_matrix(m, int(cfg.get("k", graph_degree(m))), cfg.get("weights", "max-degree"))
    schedule = schedule_from_config(cfg.get("schedule", {"type": "constant"}), P)
    seeds = Seeds(**cfg.get("seeds", {}))
    config = RunConfig(m, int(cfg.get("T", 10_000)), mu, loss, schedule, seeds,
                       trace_stride=int(cfg.get("trace_stride", 0)), record_last=False)
    obj = Objective(loss, mu, data)
    ref = reference_optimum(obj) if cfg.get("reference", True) else None
    trace = run(config, split_uniform(data, m, seeds.split), ref)
    out_dir = args.out_dir or "."
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "trace.csv"), "w", newline="") as fh:
        trace.write_csv(fh)
    summary = {
        "config": config.describe(), "rho_sq": est.rho_sq, "lambda2": lambda2(P), "backend": trace.backend,
        "final_J_polyak": trace.J_polyak[-1].tolist(), "wall_time": trace.wall_time,
        "loss_note": loss.note,
    }
    if ref is not None:
        summary["reference"] = ref.to_dict()
        summary["final_gap"] = trace.gap()[-1].tolist()
    _emit(summary, out_dir, "run.json")


def cmd_bound(args):
    cfg = _load_config(args.config)
    for key in ("m", "n", "d", "T", "mu", "L", "rho_sq", "lambda2", "nu"):
        v = getattr(args, key)
        if v is not None:
            cfg[key] = v
    theorem = str(cfg.pop("theorem", args.theorem))
    if theorem == "network":
        value = network_error_bound(cfg["T"], cfg["m"], cfg["L"], cfg["mu"], cfg["lambda2"])
        _emit({"formula": "network_error", "value": value}, args.out_dir, "bound.json")
        return
    inp = BoundInputs(**{k: cfg[k] for k in ("m", "n", "d", "T", "mu", "L", "rho_sq", "lambda2")}, nu=cfg.get("nu"))
    fn = {"1": theorem1_bound, "2": theorem2_bound, "3": theorem3_bound}.get(theorem)
    if fn is None:
        raise SystemExit(f"unknown theorem {theorem!r}; use 1, 2, 3 or network")
    report = fn(inp).to_dict()
    report["regime"] = regime_classify(inp.m, inp.rho_sq)
    _emit(report, args.out_dir, "bound.json")


def cmd_asymptotic(args):
    cfg = _load_config(args.config)
    loss = cfg.get("loss", args.loss)
    if loss != "squared":
        raise UnsupportedError(f"{loss} loss is not twice differentiable; the asymptotic bounds need a smooth loss")
    mu = float(cfg.get("mu", args.mu))
    m = int(cfg.get("m", args.m))
    k = int(cfg.get("k", graph_degree(m) if args.k is None else args.k))
    P = uniform_neighbor_weights(k_regular_graph(m, k))
    path = cfg.get("path", args.path)
    G = 1.0
    if path:
        data = normalize(load_libsvm(path))
        if data.d > MAX_DIM:
            raise UnsupportedError(f"d = {data.d} exceeds {MAX_DIM}")
        obj = Objective(LossSpec.squared(mu=mu), mu, data)
        w_star = reference_optimum(obj).w_star
        A = hessian_at(obj, w_star)
        C = noise_covariance_at(obj, w_star)
        rho_sq = estimate_spectral_norm(data).rho_sq
    else:
        d = int(cfg.get("d", args.d))
        pop = PopulationSquaredObjective(GaussianStream(d, args.seed), mu)
        A, C, rho_sq = pop.hessian(), pop.noise_covariance(seed=args.seed), pop.s
    sol = lyapunov_solve(A, C)
    L = LossSpec.squared(radius=1.0 / math.sqrt(mu)).lipschitz
    out = {
        "trace_H": sol.trace,
        "lyapunov_residual": sol.residual,
        "bound_lemma": asymptotic_node_bound(P.weights[0], sol, G, mu),
        "bound_theorem6": theorem6_bound(max(k, 1), rho_sq, L, A, G, mu),
        "bound_theorem6_m": theorem6_bound(max(k, 1), rho_sq, L, A, G, mu, variant="m", m=m),
        "m": m, "k": k, "mu": mu, "rho_sq": rho_sq, "L": L, "G": G,
    }
    _emit(out, args.out_dir, "asymptotic.json")


def cmd_recipe(args):
    fn = RECIPES[args.name]
    kwargs = _load_config(args.config)
    if args.seed is not None or args.seeds is not None:
        base = 0 if args.seed is None else args.seed
        kwargs["seeds"] = list(range(base, base + (args.seeds or 5)))
    if args.m is not None:
        key = "ms" if args.name == "fig2_infinite" else "m"
        kwargs[key] = args.m if key == "m" else [args.m]
    out_dir = os.path.join(args.out_dir or "results", args.name)
    result = fn(out_dir, threads=args.threads, **kwargs)
    _emit({"recipe": result.name, "out_dir": out_dir, "files": result.files, "extra": result.extra})


def cmd_profile(args):
    paths = {}
    for item in args.datasets:
        name, sep, path = item.partition("=")
        if not sep:
            name, path = os.path.splitext(os.path.basename(item))[0], item
        paths[name] = path
    out = None if args.out_dir is None else os.path.join(args.out_dir, "profile.json")
    if out:
        os.makedirs(args.out_dir, exist_ok=True)
    _emit(table1_profile(paths, out))


def build_parser():
    p = argparse.ArgumentParser(prog="consensus-sgd", description="Consensus SGD simulator and diagnostics.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=True):
        sp.add_argument("--config", help="JSON file with options")
        sp.add_argument("--out-dir", help="directory for output files")
        sp.add_argument("--threads", type=int, default=1)
        if seed:
            sp.add_argument("--seed", type=int)

    sp = sub.add_parser("rho", help="spectral norm of a dataset")
    sp.add_argument("path")
    sp.add_argument("--label-map", help="e.g. 3:+1,5:-1")
    sp.add_argument("--dimension", type=int)
    sp.add_argument("--tol", type=float, default=1e-6)
    sp.add_argument("--max-iter", type=int, default=1000)
    common(sp, seed=False)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_rho)

    sp = sub.add_parser("mixing", help="mixing matrix and lambda_2")
    sp.add_argument("--m", type=int, required=True)
    sp.add_argument("--k", type=int)
    sp.add_argument("--weights", choices=["max-degree", "uniform"], default="max-degree")
    sp.add_argument("--nu", type=float, help="also report lambda_2 of E[P(t)^2] for this frequency")
    common(sp)
    sp.set_defaults(func=cmd_mixing)

    sp = sub.add_parser("run", help="one engine run from a JSON config")
    common(sp)
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("bound", help="evaluate a bound")
    sp.add_argument("--theorem", default="1", help="1, 2, 3 or network")
    for name, typ in (("m", int), ("n", int), ("d", int), ("T", float), ("mu", float), ("L", float),
                      ("rho-sq", float), ("lambda2", float), ("nu", float)):
        sp.add_argument(f"--{name}", type=typ, dest=name.replace("-", "_"))
    common(sp)
    sp.set_defaults(func=cmd_bound)

    sp = sub.add_parser("asymptotic", help="asymptotic trace bounds (squared loss)")
    sp.add_argument("--path", help="libsvm file (d <= 200); default is the Gaussian generator")
    sp.add_argument("--loss", default="squared")
    sp.add_argument("--d", type=int, default=20)
    sp.add_argument("--mu", type=float, default=0.1)
    sp.add_argument("--m", type=int, default=16)
    sp.add_argument("--k", type=int)
    common(sp, seed=False)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_asymptotic)

    sp = sub.add_parser("recipe", help="run a named experiment")
    sp.add_argument("name", choices=sorted(RECIPES))
    sp.add_argument("--seeds", type=int, help="number of seeds (default 5)")
    sp.add_argument("--m", type=int)
    common(sp)
    sp.set_defaults(func=cmd_recipe)

    sp = sub.add_parser("profile", help="N, d, rho^2 of dataset files")
    sp.add_argument("datasets", nargs="+", help="name=path or path")
    common(sp, seed=False)
    sp.set_defaults(func=cmd_profile)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
