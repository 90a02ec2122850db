"""Infinite-data diagnostics for smooth losses.

Hessians, gradient-noise covariances, the Lyapunov equation
``A H + H A = C`` and the trace bounds built from them.  Only the squared
loss qualifies: the hinge loss is not twice differentiable.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, UnsupportedError
from .objective import SQUARED

MAX_DIM = 200
SYM_TOL = 1e-10


def _require_smooth(obj):
    if obj.loss.kind != SQUARED:
        raise UnsupportedError(
            f"{obj.loss.kind} loss is not twice differentiable; asymptotic diagnostics need a smooth loss"
        )
    if obj.data.d > MAX_DIM:
        raise UnsupportedError(f"asymptotic diagnostics are limited to d <= {MAX_DIM}, got {obj.data.d}")


@dataclass(frozen=True)
class NoiseCovariance:
    C: np.ndarray
    mode: str = "exact"
    draws: int = 0

    def __post_init__(self):
        C = np.asarray(self.C, dtype=np.float64)
        if C.ndim != 2 or C.shape[0] != C.shape[1]:
            raise InvalidArgumentError("covariance must be square")
        if not np.allclose(C, C.T, atol=SYM_TOL, rtol=0):
            raise InvalidArgumentError("covariance is not symmetric")
        if C.size and np.linalg.eigvalsh(C)[0] < -SYM_TOL * max(1.0, np.abs(C).max()):
            raise InvalidArgumentError("covariance is not positive semidefinite")


@dataclass(frozen=True)
class LyapunovSolution:
    H: np.ndarray
    residual: float

    @property
    def trace(self) -> float:
        return float(np.trace(self.H))


def hessian_at(obj, w=None) -> np.ndarray:
    """``(1/N) sum x x^T + mu I`` for the squared loss (independent of ``w``)."""
    _require_smooth(obj)
    d = obj.data.d
    H = obj.mu * np.eye(d)
    if obj.data.N:
        X = obj.data.X
        H += np.asarray((X.T @ X).toarray()) / obj.data.N
    return H


def _per_example_gradients(obj, w):
    w = np.asarray(w, dtype=np.float64)
    z = obj.data.y * (obj.data.X @ w)
    coef = (z - 1.0) * obj.data.y
    G = obj.data.X.multiply(coef[:, None]).toarray()
    return G + obj.mu * w[None, :]


def noise_covariance_at(obj, w, mode="exact", draws=100_000, seed=0) -> NoiseCovariance:
    """Covariance of one uniformly sampled gradient around the full gradient.

    ``exact`` enumerates all ``N`` examples; ``empirical`` averages over
    ``draws`` samples drawn with replacement.
    """
    _require_smooth(obj)
    if obj.data.N == 0:
        raise InvalidArgumentError("no examples to sample from")
    G = _per_example_gradients(obj, w)
    if mode == "exact":
        mean = G.mean(axis=0)
        C = G.T @ G / G.shape[0] - np.outer(mean, mean)
        used = 0
    elif mode == "empirical":
        idx = np.random.default_rng(seed).integers(0, G.shape[0], size=int(draws))
        S = G[idx]
        mean = S.mean(axis=0)
        C = S.T @ S / S.shape[0] - np.outer(mean, mean)
        used = int(draws)
    else:
        raise InvalidArgumentError(f"mode must be 'exact' or 'empirical', got {mode!r}")
    C = 0.5 * (C + C.T)
    # clip round-off below zero so the PSD check is about the data, not arithmetic
    vals, vecs = np.linalg.eigh(C)
    if vals[0] < 0:
        C = (vecs * np.maximum(vals, 0.0)) @ vecs.T
        C = 0.5 * (C + C.T)
    return NoiseCovariance(C, mode, used)


def lyapunov_solve(A, C) -> LyapunovSolution:
    """Solve ``A H + H A = C`` for symmetric positive definite ``A``.

    In the eigenbasis of ``A`` the equation decouples:
    ``H~_ij = C~_ij / (lambda_i + lambda_j)``.
    """
    A = np.asarray(A, dtype=np.float64)
    C = np.asarray(getattr(C, "C", C), dtype=np.float64)
    if A.shape != C.shape or A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InvalidArgumentError("A and C must be square matrices of the same size")
    if not np.allclose(A, A.T, atol=SYM_TOL * max(1.0, np.abs(A).max()), rtol=0):
        raise InvalidArgumentError("A must be symmetric")
    lam, U = np.linalg.eigh(A)
    if lam[0] <= 0:
        raise InvalidArgumentError(f"A is not positive definite (smallest eigenvalue {lam[0]:.3g})")
    Ct = U.T @ C @ U
    H = U @ (Ct / (lam[:, None] + lam[None, :])) @ U.T
    H = 0.5 * (H + H.T)
    cn = np.linalg.norm(C)
    r = np.linalg.norm(A @ H + H @ A - C)
    return LyapunovSolution(H, float(r / cn) if cn > 0 else float(r))


def asymptotic_node_bound(P_row, H, G, mu) -> float:
    """``sum_j P_ij^2 * Tr(H) * G / mu`` over the closed neighbourhood of node ``i``."""
    P_row = np.asarray(P_row, dtype=np.float64)
    trace = H.trace if isinstance(H, LyapunovSolution) else float(np.trace(H))
    return float(np.sum(P_row ** 2)) * trace * G / mu


def theorem6_bound(k, rho_sq, L, hessian_at_opt, G, mu, variant="k", m=None) -> float:
    """``25 rho L^2 / k * Tr(hessian^-1) * G / mu`` with ``rho = sqrt(rho_sq)``.

    ``variant="m"`` divides by the number of nodes instead of the degree.
    """
    if variant == "k":
        if k < 1:
            raise InvalidArgumentError("k must be >= 1")
        denom = k
    elif variant == "m":
        if m is None or m < 1:
            raise InvalidArgumentError("variant 'm' needs m >= 1")
        denom = m
    else:
        raise InvalidArgumentError(f"unknown variant {variant!r}")
    Hs = np.asarray(hessian_at_opt, dtype=np.float64)
    lam = np.linalg.eigvalsh(0.5 * (Hs + Hs.T))
    if lam[0] <= 0:
        raise InvalidArgumentError("Hessian at the optimum is singular or indefinite")
    return 25.0 * math.sqrt(rho_sq) * L ** 2 / denom * float(np.sum(1.0 / lam)) * G / mu


class PopulationSquaredObjective:
    """Exact expected squared-loss objective of a :class:`GaussianStream`.

    With ``E[x x^T] = s I`` and ``E[y x] = c h``::

        J(w) = (1 - 2 c h^T w + s ||w||^2) / 2 + mu ||w||^2 / 2

    so the Hessian is ``(s + mu) I`` and ``w* = c h / (s + mu)``.
    """

    def __init__(self, stream, mu):
        if not mu > 0:
            raise InvalidArgumentError("mu must be positive")
        self.stream, self.mu = stream, float(mu)
        self.s, self.c = stream.population_moments()
        self.h = stream.hyperplane
        self.w_star = self.c * self.h / (self.s + self.mu)
        self.J_star = self.value(self.w_star)

    @property
    def d(self):
        return self.stream.d

    def value(self, w) -> float:
        return float(self.values(np.asarray(w)[None, :])[0])

    def values(self, W) -> np.ndarray:
        W = np.asarray(W, dtype=np.float64)
        sq = np.einsum("ij,ij->i", W, W)
        return 0.5 * (1.0 - 2.0 * self.c * (W @ self.h) + self.s * sq) + 0.5 * self.mu * sq

    def hessian(self) -> np.ndarray:
        return (self.s + self.mu) * np.eye(self.d)

    def noise_covariance(self, draws=100_000, seed=0) -> NoiseCovariance:
        """Monte-Carlo covariance of the single-sample gradient at ``w*``."""
        X, y = self.stream.draw(np.random.default_rng([seed, 7]), int(draws))
        coef = (y * (X @ self.w_star) - 1.0) * y
        S = X * coef[:, None]
        mean = S.mean(axis=0)
        C = S.T @ S / S.shape[0] - np.outer(mean, mean)
        C = 0.5 * (C + C.T)
        vals, vecs = np.linalg.eigh(C)
        if vals[0] < 0:
            C = (vecs * np.maximum(vals, 0.0)) @ vecs.T
            C = 0.5 * (C + C.T)
        return NoiseCovariance(C, "empirical", int(draws))
