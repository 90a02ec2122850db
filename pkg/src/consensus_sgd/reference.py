"""Centralized reference optimum ``w* = argmin J`` used to measure suboptimality.

* squared loss: exact linear solve, polished by full-gradient descent with
  step ``1/(sigma_1 + mu)``; certificate ``J(w) - J* <= ||grad||^2 / (2 mu)``.
* hinge loss: dual coordinate ascent; certificate is the duality gap.
  The engine-floor alternative (best Polyak-averaged single-node run over
  several seeds) is available as ``method="engine"``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

from . import _backend
from .errors import ConvergenceError, InvalidArgumentError
from .objective import HINGE, SQUARED, Objective


@dataclass
class ReferenceOptimum:
    w_star: np.ndarray
    J_star: float
    method: str
    certified_gap: float
    meta: dict = field(default_factory=dict)

    @property
    def lower_bound(self) -> float:
        """A value no larger than the true minimum."""
        return self.J_star - self.certified_gap

    def to_dict(self) -> dict:
        return {"J_star": self.J_star, "method": self.method, "certified_gap": self.certified_gap, **self.meta}


def reference_optimum(obj: Objective, *, method=None, tol=None, max_iter=None, seed=0, **engine_kw) -> ReferenceOptimum:
    if obj.data.N == 0:
        raise InvalidArgumentError("empty dataset")
    if obj.loss.kind == SQUARED:
        if method not in (None, "gradient"):
            raise InvalidArgumentError(f"squared loss supports method='gradient', got {method!r}")
        return _squared_optimum(obj, tol=1e-9 if tol is None else tol, max_iter=max_iter or 100_000)
    if method in (None, "sdca"):
        return sdca_optimum(obj, tol=1e-10 if tol is None else tol, max_epochs=max_iter or 2000, seed=seed)
    if method == "engine":
        return engine_floor(obj, **engine_kw)
    raise InvalidArgumentError(f"unknown method {method!r} for {obj.loss.kind} loss")


def _squared_optimum(obj, tol, max_iter):
    from .spectral import estimate_spectral_norm

    X, y, N, mu = obj.data.X, obj.data.y, obj.data.N, obj.mu
    d = obj.data.d
    rhs = X.T @ y / N
    op = spla.LinearOperator((d, d), matvec=lambda v: X.T @ (X @ v) / N + mu * v, dtype=np.float64)
    if d <= 2000:
        A = np.asarray((X.T @ X).toarray()) / N + mu * np.eye(d)
        w = np.linalg.solve(A, rhs)
    else:
        w, _ = spla.cg(op, rhs, rtol=1e-13, maxiter=10 * d)
    sigma = estimate_spectral_norm(obj.data).rho_sq
    step = 1.0 / (sigma + mu)
    g = obj.full_gradient(w)
    gn = float(np.linalg.norm(g))
    it = 0
    while gn > tol and it < max_iter:
        w = w - step * g
        g = obj.full_gradient(w)
        gn = float(np.linalg.norm(g))
        it += 1
    if gn > tol:
        raise ConvergenceError(f"gradient norm {gn:.3g} above {tol:g}", estimate=w, residual=gn, iterations=it)
    J = obj.value(w)
    return ReferenceOptimum(w, J, "solve+gradient", gn * gn / (2.0 * mu), {"grad_norm": gn, "polish_steps": it})


def _primal_dual(obj, w, alpha):
    return obj.value(w), float(alpha.mean()) - 0.5 * obj.mu * float(w @ w)


def sdca_optimum(obj: Objective, tol=1e-10, max_epochs=2000, seed=0, backend=None) -> ReferenceOptimum:
    """Hinge-loss SVM optimum by stochastic dual coordinate ascent.

    Stops when the duality gap falls below ``tol * max(1, J)``; ``J_star``
    is the primal value of the final iterate and ``certified_gap`` the
    remaining duality gap.
    """
    if obj.loss.kind != HINGE:
        raise InvalidArgumentError("dual coordinate ascent is implemented for the hinge loss")
    kern = _backend.get(backend)
    X, y, N = obj.data.X, obj.data.y, obj.data.N
    indptr, indices = X.indptr.astype(np.int64), X.indices.astype(np.int64)
    sqnorm = np.asarray(X.multiply(X).sum(axis=1)).ravel()
    alpha = np.zeros(N)
    w = np.zeros(obj.data.d)
    mu_n = obj.mu * N
    rng = np.random.default_rng(seed)
    primal, dual = _primal_dual(obj, w, alpha)
    epochs = 0
    while primal - dual > tol * max(1.0, abs(primal)) and epochs < max_epochs:
        order = rng.permutation(N).astype(np.int64)
        kern.sdca_epoch(indptr, indices, X.data, y, sqnorm, alpha, w, order, mu_n)
        epochs += 1
        if epochs % 5 == 0 or epochs == max_epochs:
            # recompute w from alpha occasionally so round-off does not drift
            w = np.asarray(X.T @ (alpha * y)).ravel() / mu_n
            primal, dual = _primal_dual(obj, w, alpha)
    gap = primal - dual
    if gap > tol * max(1.0, abs(primal)):
        raise ConvergenceError(f"duality gap {gap:.3g} after {epochs} epochs", estimate=w, residual=gap, iterations=epochs)
    return ReferenceOptimum(w, primal, "sdca", max(gap, 0.0), {"epochs": epochs, "dual_value": dual})


def engine_floor(obj: Objective, T=10_000_000, seeds=(0, 1, 2, 3, 4)) -> ReferenceOptimum:
    """Best Polyak-averaged single-node engine run over ``seeds``, flagged as a floor."""
    from .data import split_uniform
    from .engine import RunConfig, Seeds, run
    from .schedules import Constant
    from .topology import MixingMatrix

    shards = split_uniform(obj.data, 1, 0)
    best = None
    for s in seeds:
        cfg = RunConfig(1, int(T), obj.mu, obj.loss, Constant(MixingMatrix(np.ones((1, 1)))),
                        Seeds(0, s, 0), record_last=False)
        tr = run(cfg, shards)
        J = float(tr.J_polyak[-1, 0])
        if best is None or J < best[1]:
            best = (tr.polyak[0], J)
    return ReferenceOptimum(best[0], best[1], "engine-floor", float("nan"), {"T": int(T), "seeds": list(seeds)})
