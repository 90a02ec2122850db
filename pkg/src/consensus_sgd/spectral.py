"""Spectral norm of the sample second-moment matrix and the random-submatrix check."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla

from .errors import ConvergenceError, InvalidArgumentError

# subsamples up to this size (in min(K, d)) are handled by a dense eigensolver
_DENSE_LIMIT = 1500


@dataclass(frozen=True)
class CovarianceEstimate:
    rho_sq: float
    iterations_used: int
    residual: float


def estimate_spectral_norm(data, tol=1e-6, max_iter=1000, seed=0, method="lanczos") -> CovarianceEstimate:
    """Largest eigenvalue of ``(1/N) X^T X`` from products with ``X`` and ``X^T`` only.

    The cost per product is O(nnz); no d x d matrix is formed.

    Parameters
    ----------
    tol : float
        Relative accuracy of the eigenvalue.
    max_iter : int
        Iteration budget (Lanczos restarts or power steps).
    method : {"lanczos", "power"}
        ``lanczos`` (ARPACK) converges on clustered top eigenvalues, which
        near-isotropic data produce.  ``power`` is plain power iteration
        stopped on the relative change of the Rayleigh quotient together
        with the geometric tail of those changes; it is only reliable when
        the top eigenvalue is well separated.

    Raises
    ------
    ConvergenceError
        Budget exhausted; the best estimate is attached.
    """
    if data.N == 0:
        raise InvalidArgumentError("empty dataset")
    if tol <= 0:
        raise InvalidArgumentError("tol must be positive")
    if data.nnz == 0:
        return CovarianceEstimate(0.0, 0, 0.0)
    X, N = data.X, data.N
    v0 = np.random.default_rng(seed).standard_normal(data.d)
    if method == "power":
        return _power(X, N, v0, tol, max_iter)
    if method != "lanczos":
        raise InvalidArgumentError(f"unknown method {method!r}")
    if data.d <= 2:
        lam = float(np.linalg.eigvalsh(np.asarray((X.T @ X).toarray()) / N)[-1])
        return CovarianceEstimate(lam, 1, 0.0)
    count = [0]

    def matvec(v):
        count[0] += 1
        return X.T @ (X @ np.ravel(v)) / N

    op = spla.LinearOperator((data.d, data.d), matvec=matvec, dtype=np.float64)
    try:
        vals, vecs = spla.eigsh(op, k=1, which="LA", tol=tol * 1e-2, v0=v0, maxiter=max_iter)
    except spla.ArpackNoConvergence as exc:
        best = float(exc.eigenvalues[-1]) if len(exc.eigenvalues) else float("nan")
        raise ConvergenceError(
            f"Lanczos did not reach tol={tol} within {max_iter} restarts",
            estimate=CovarianceEstimate(best, count[0], float("inf")), residual=float("inf"), iterations=count[0],
        ) from None
    theta = float(vals[-1])
    v = vecs[:, -1]
    res = float(np.linalg.norm(matvec(v) - theta * v)) / theta if theta > 0 else 0.0
    return CovarianceEstimate(theta, count[0], res)


def _power(X, N, v, tol, max_iter):
    v = v / np.linalg.norm(v)
    theta_prev = None
    delta_prev = None
    residual = math.inf
    theta = 0.0
    for it in range(1, max_iter + 1):
        u = X.T @ (X @ v) / N
        theta = float(v @ u)
        nrm = float(np.linalg.norm(u))
        if nrm == 0.0:
            return CovarianceEstimate(0.0, it, 0.0)
        v = u / nrm
        if theta_prev is not None:
            delta = abs(theta - theta_prev) / theta
            if delta == 0.0:
                return CovarianceEstimate(theta, it, 0.0)
            if delta_prev:
                ratio = delta / delta_prev
                tail = delta * ratio / (1.0 - ratio) if ratio < 1.0 else math.inf
                residual = max(delta, tail)
                if residual < tol:
                    return CovarianceEstimate(theta, it, residual)
            delta_prev = delta
        theta_prev = theta
    raise ConvergenceError(
        f"power iteration did not reach tol={tol} in {max_iter} steps",
        estimate=CovarianceEstimate(theta, max_iter, residual),
        residual=residual,
        iterations=max_iter,
    )


def top_eigenvalue_of_gram(Z, seed=0) -> float:
    """``sigma_1(Z^T Z)`` for a (sparse) sample matrix ``Z`` with rows as examples."""
    K, d = Z.shape
    if min(K, d) <= _DENSE_LIMIT:
        if K <= d:
            G = (Z @ Z.T).toarray() if hasattr(Z, "toarray") else Z @ Z.T
        else:
            G = (Z.T @ Z).toarray() if hasattr(Z, "toarray") else Z.T @ Z
        return float(np.linalg.eigvalsh(G)[-1])
    from .data import Dataset

    sub = Dataset(Z, np.ones(K))
    return estimate_spectral_norm(sub, tol=1e-9, max_iter=5000, seed=seed).rho_sq * K


@dataclass(frozen=True)
class SubmatrixCheck:
    mean_ratio: float
    bound: float
    holds: bool
    precondition_met: bool
    rho_sq: float
    threshold: float


def lemma_threshold(rho_sq, d) -> float:
    """Smallest sample count the subsampling guarantee asks for: ``4/(3 rho^2) log d``."""
    return 4.0 / (3.0 * rho_sq) * math.log(d)


def submatrix_lemma_check(data, K, trials, seed, with_replacement=True, rho_sq=None) -> SubmatrixCheck:
    """Monte-Carlo mean of ``sigma_1(Q_K)/K`` against ``5 rho^2``.

    ``Q_K`` is the (unnormalized) second-moment matrix of ``K`` examples
    drawn uniformly with replacement.  With ``with_replacement=False`` the
    draw is a uniformly random K-subset instead; for ``K = N`` that is the
    full data set and the ratio equals ``rho^2``.
    A failed precondition is reported, not raised.
    """
    if K <= 0 or trials <= 0:
        raise InvalidArgumentError("K and trials must be positive")
    if not with_replacement and K > data.N:
        raise InvalidArgumentError("K exceeds N for sampling without replacement")
    if rho_sq is None:
        rho_sq = estimate_spectral_norm(data, seed=seed).rho_sq
    rng = np.random.default_rng(seed)
    ratios = np.empty(trials)
    for k in range(trials):
        if with_replacement:
            rows = rng.integers(0, data.N, size=K)
        else:
            rows = np.sort(rng.permutation(data.N)[:K])
        ratios[k] = top_eigenvalue_of_gram(data.X[rows], seed=seed) / K
    threshold = lemma_threshold(rho_sq, data.d) if rho_sq > 0 else math.inf
    mean_ratio = float(ratios.mean())
    bound = 5.0 * rho_sq
    return SubmatrixCheck(
        mean_ratio=mean_ratio,
        bound=bound,
        holds=mean_ratio <= bound * (1 + 1e-12),
        precondition_met=K > threshold,
        rho_sq=float(rho_sq),
        threshold=threshold,
    )
