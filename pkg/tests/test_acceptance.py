"""Acceptance criteria, one test each, at the stated tolerances and budgets.

Every test records a PASS/FAIL line that is printed in the terminal summary.
"""
import math
import os
import time

import numpy as np
import pytest

from conftest import record_acceptance
from consensus_sgd.bounds import (
    BoundInputs,
    network_error_bound,
    theorem1_bound,
    theorem2_bound,
    theorem3_bound,
)
from consensus_sgd.data import load_libsvm, normalize, split_uniform, synth_controlled_rho, synth_gaussian_classification
from consensus_sgd.engine import RunConfig, Seeds, average_iterate_check, run
from consensus_sgd.objective import LossSpec
from consensus_sgd.recipes import TABLE1, fig1_intermittent, fig2_infinite, fig3a_schemes, inflation_by_seed, rate_shape
from consensus_sgd.schedules import Constant, IidBernoulli, MiniBatchPeriodic, PowerLaw
from consensus_sgd.spectral import estimate_spectral_norm, lemma_threshold, submatrix_lemma_check
from consensus_sgd.topology import MixingMatrix, cycle_graph, k_regular_graph, lambda2, max_degree_weights
from oracles import bound_oracle, lambda2_general

pytestmark = pytest.mark.acceptance


class Clock:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.start


def _finish(name, ok, detail, clock, budget):
    within = clock.seconds < budget
    record_acceptance(name, ok and within, f"{detail}; budget {budget:g}s", clock.seconds)
    assert ok, detail
    assert within, f"{name} took {clock.seconds:.1f}s, budget {budget}s"


def test_c1_mixing_invariants():
    rng = np.random.default_rng(2024)
    worst_inv, worst_l2, n = 0.0, 0.0, 0
    with Clock() as c:
        while n < 1000:
            m = int(rng.integers(2, 65))
            k = int(rng.integers(1, m))
            if (m * k) % 2:
                continue
            g = k_regular_graph(m, k).relabel(rng.permutation(m))
            P = max_degree_weights(g)
            W = P.weights
            A = g.adjacency() + np.eye(m)
            worst_inv = max(worst_inv, np.abs(W.sum(0) - 1).max(), np.abs(W.sum(1) - 1).max(), np.abs(W - W.T).max(),
                            np.abs(W[A == 0]).max(initial=0.0), -min(W.min(), 0.0))
            worst_l2 = max(worst_l2, abs(lambda2(P) - lambda2_general(W)))
            n += 1
    ok = worst_inv <= 1e-12 and worst_l2 <= 1e-9
    _finish("C1 mixing invariants", ok, f"{n} graphs, max invariant err {worst_inv:.2e}, max lambda2 err {worst_l2:.2e}",
            c, 30)


def test_c2_average_iterate_identity():
    rng = np.random.default_rng(7)
    kinds = ["constant", "iid", "minibatch", "powerlaw"]
    worst, controls = 0.0, []
    with Clock() as c:
        for i in range(50):
            kind = kinds[i % 4]
            m = int(rng.integers(2, 17))
            data = synth_gaussian_classification(m * 40, int(rng.integers(2, 30)), seed=i)
            sh = split_uniform(data, m, i)
            k = 2 if m > 2 else 1
            P = max_degree_weights(k_regular_graph(m, k))
            sched = {"constant": Constant(P), "iid": IidBernoulli(P, float(rng.uniform(0.05, 1))),
                     "minibatch": MiniBatchPeriodic(P, int(rng.integers(1, 9))),
                     "powerlaw": PowerLaw(P, float(rng.uniform(0.5, 2)), float(rng.uniform(0.1, 1)))}[kind]
            loss = LossSpec.hinge() if i % 2 else LossSpec.squared(radius=5.0)
            cfg = RunConfig(m, int(rng.integers(20, 200)), float(rng.uniform(0.05, 1)), loss, sched,
                            Seeds(i, i, i), debug=True, record_objective=False, record_last=False)
            worst = max(worst, average_iterate_check(run(cfg, sh)))
        # negative control: row-stochastic but not column-stochastic
        for i in range(5):
            m = 6
            W = np.zeros((m, m))
            W[0, 0] = 1.0
            for r in range(1, m):
                W[r, r - 1] = W[r, r] = 0.5
            data = synth_gaussian_classification(m * 40, 5, seed=100 + i)
            cfg = RunConfig(m, 100, 0.2, LossSpec.hinge(), Constant(MixingMatrix(W, check=False)), Seeds(i, i, i),
                            debug=True, record_objective=False, record_last=False)
            controls.append(average_iterate_check(run(cfg, split_uniform(data, m, i))))
    ok = worst <= 1e-10 and min(controls) > 1e-10
    _finish("C2 average-iterate identity", ok,
            f"max deviation {worst:.2e} over 50 configs; negative control min {min(controls):.2e}", c, 120)


def test_c3_network_error_lemma():
    data = synth_controlled_rho(20_000, 100, 0.05, seed=0)
    mu = 1e-2
    t_rec = tuple(range(10, 10_001))
    setups = [(4, cycle_graph(4)), (16, cycle_graph(16)), (16, k_regular_graph(16, 4))]
    worst, violations = 0.0, 0
    with Clock() as c:
        for m, g in setups:
            P = max_degree_weights(g)
            lam = lambda2(P)
            bound = np.array([network_error_bound(t, m, 1.0, mu, lam) for t in t_rec])
            for s in range(5):
                cfg = RunConfig(m, 10_000, mu, LossSpec.hinge(), Constant(P), Seeds(s, s, s), record_times=t_rec,
                                record_objective=False, record_last=False)
                tr = run(cfg, split_uniform(data, m, s))
                ratio = tr.net_err / bound
                worst = max(worst, float(ratio.max()))
                violations += int(np.sum(ratio > 1))
    _finish("C3 network-error lemma", violations == 0,
            f"3 topologies x 5 seeds, max measured/bound {worst:.3f}, violations {violations}", c, 300)


def test_c4_rate_shape():
    with Clock() as c:
        res = rate_shape(None)
    slope = res.extra["slope"]
    _finish("C4 rate shape", -1.15 <= slope <= -0.70, f"slope {slope:.3f} over t in [1e3, 1e5], 5 seeds", c, 300)


def test_c5_submatrix_lemma():
    lines, ok = [], True
    with Clock() as c:
        for target in (0.05, 0.2, 0.66):
            data = synth_controlled_rho(20_000, 100, target, seed=1)
            rho_sq = estimate_spectral_norm(data).rho_sq
            for K in (math.floor(lemma_threshold(rho_sq, data.d)) + 1, 4 * math.ceil(lemma_threshold(rho_sq, data.d))):
                chk = submatrix_lemma_check(data, K, trials=50, seed=K, rho_sq=rho_sq)
                ok &= chk.precondition_met and chk.holds
                lines.append(f"rho2={rho_sq:.3f} K={K}: {chk.mean_ratio:.3f}<={chk.bound:.3f}")
    _finish("C5 submatrix lemma", ok, "; ".join(lines), c, 120)


def test_c6_data_dependence():
    with Clock() as c:
        res = fig1_intermittent(None, nus=(1.0, 0.002), seeds=range(5))
        pairs = inflation_by_seed(res, "rho0.01", "rho0.21", 0.002)
    wins = sum(high > low for _, low, high in pairs)
    detail = ", ".join(f"s{s}: {lo:.2f} vs {hi:.2f}" for s, lo, hi in pairs)
    _finish("C6 data-dependence ordering", wins >= 4, f"{wins}/5 seeds high-rho inflation larger ({detail})", c, 600)


def test_c7_scheme_ordering():
    with Clock() as c:
        res = fig3a_schemes(None, seeds=range(5))
    wins, parts = 0, []
    for s in range(5):
        mb = res.select(schedule="minibatch_b128", seed=s)[0]
        it = res.select(schedule="iid_nu0.0078125", seed=s)[0]
        assert mb["samples_total"] == it["samples_total"]
        wins += mb["gap_mean"] <= it["gap_mean"]
        parts.append(f"s{s}: {mb['gap_mean']:.4g} vs {it['gap_mean']:.4g}")
    _finish("C7 scheme ordering", wins >= 4, f"{wins}/5 seeds minibatch <= intermittent ({', '.join(parts)})", c, 600)


def test_c8_asymptotic_no_network_effect():
    with Clock() as c:
        res = fig2_infinite(None, ms=(1, 4, 16), seeds=range(10))
    med = res.extra["medians"]
    resid = max(r["lyapunov_residual"] for r in res.rows)
    ok = med[16] <= 1.2 * med[1] and med[1] >= med[4] >= med[16] and resid <= 1e-8
    _finish("C8 asymptotic no network effect", ok,
            f"median T*gap m=1 {med[1]:.3f}, m=4 {med[4]:.3f}, m=16 {med[16]:.3f}; max residual {resid:.1e}", c, 600)


def test_c9_bound_evaluators():
    rng = np.random.default_rng(99)
    worst, mono_fail = 0.0, 0
    with Clock() as c:
        for _ in range(10_000):
            nu = float(rng.uniform(0.01, 1))
            T = float(10 ** rng.uniform(math.log10(2 / nu) + 0.01, 9))
            kw = dict(m=int(rng.integers(1, 1025)), n=int(rng.integers(1, 10**6)), d=int(rng.integers(2, 10**6)),
                      T=T, mu=float(10 ** rng.uniform(-8, 0)), L=float(rng.uniform(0.1, 10)),
                      rho_sq=float(rng.uniform(1e-6, 1)), lambda2=float(rng.uniform(0, 0.999)), nu=nu)
            inp = BoundInputs(**kw)
            args = (inp.m, inp.T, inp.mu, inp.L, inp.rho_sq, inp.lambda2)
            ref = bound_oracle("iid", *args)
            ref3 = bound_oracle("minibatch", *args, nu=nu)
            for got, want in ((theorem1_bound(inp).value, ref), (theorem2_bound(inp).value, ref),
                              (theorem3_bound(inp).value, ref3)):
                worst = max(worst, abs(got - want) / want)
            lam_b, rho_b = float(rng.uniform(0, 0.999)), float(rng.uniform(1e-6, 1))
            for fn in (theorem1_bound, theorem2_bound, theorem3_bound):
                for key, other in (("lambda2", lam_b), ("rho_sq", rho_b)):
                    lo, hi = sorted((kw[key], other))
                    a = fn(BoundInputs(**{**kw, key: lo})).value
                    b = fn(BoundInputs(**{**kw, key: hi})).value
                    mono_fail += a > b * (1 + 1e-12)
    ok = worst <= 1e-12 and mono_fail == 0
    _finish("C9 bound evaluators", ok, f"1e4 inputs, max rel err {worst:.1e}, monotonicity failures {mono_fail}", c, 10)


DATASET_ENV = {"rcv1": "RCV1_PATH", "covertype": "COVERTYPE_PATH"}
RHO_RANGE = {"rcv1": (0.008, 0.012), "covertype": (0.17, 0.25)}


@pytest.mark.parametrize("name", ["rcv1", "covertype"])
def test_c10_dataset_profile(name):
    path = os.environ.get(DATASET_ENV[name])
    if not path:
        record_acceptance(f"C10 dataset profile ({name})", "SKIP", f"set {DATASET_ENV[name]} to run", 0.0)
        pytest.skip(f"set {DATASET_ENV[name]} to the libsvm file")
    with Clock() as c:
        label_map = {1.0: 1, 2.0: -1, 3.0: -1, 4.0: -1, 5.0: -1, 6.0: -1, 7.0: -1} if name == "covertype" else None
        data = normalize(load_libsvm(path, label_map=label_map))
        rho_sq = estimate_spectral_norm(data).rho_sq
    lo, hi = RHO_RANGE[name]
    row = TABLE1[name]
    ok = lo <= rho_sq <= hi and data.N == row["N"] and data.d == row["d"]
    _finish(f"C10 dataset profile ({name})", ok, f"N {data.N}, d {data.d}, rho2 {rho_sq:.4f}", c, 3600)
