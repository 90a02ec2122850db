"""Losses, stochastic subgradients and the regularized objective.

Everything here works on the margin ``z = y * w^T x``.  Losses:

* hinge, ``max(0, 1 - z)``, 1-Lipschitz, kink at ``z = 1`` resolved to 0;
* squared, ``(1 - z)^2 / 2``, derivative 1-Lipschitz.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, UnsupportedError

HINGE = "hinge"
SQUARED = "squared"
LOSS_CODES = {HINGE: 0, SQUARED: 1}


@dataclass(frozen=True)
class LossSpec:
    kind: str
    lipschitz: float
    smoothness: float | None = None
    note: str = ""

    def __post_init__(self):
        if self.kind not in LOSS_CODES:
            raise InvalidArgumentError(f"unknown loss {self.kind!r}")
        if not self.lipschitz > 0:
            raise InvalidArgumentError("Lipschitz constant must be positive")
        if (self.smoothness is not None) != (self.kind == SQUARED):
            raise InvalidArgumentError("smoothness is set exactly for twice-differentiable losses")

    @property
    def code(self) -> int:
        return LOSS_CODES[self.kind]

    @property
    def differentiable(self) -> bool:
        return self.smoothness is not None

    @classmethod
    def hinge(cls):
        return cls(HINGE, 1.0)

    @classmethod
    def squared(cls, mu=None, rho_sq=None, radius=None):
        """Squared loss with a Lipschitz constant certified on an iterate ball.

        ``|l'(z)| = |1 - z| <= 1 + ||w||`` for ``||x|| <= 1``.  With ``mu`` and
        ``rho_sq`` the ball ``||w|| <= sqrt(10) L rho / mu`` gives the fixed
        point ``L = 1 / (1 - sqrt(10) rho / mu)`` when that is positive;
        otherwise the sublevel-set radius ``1/sqrt(mu)`` (valid for the
        minimizer) is used and the fallback is noted.
        """
        if radius is not None:
            return cls(SQUARED, 1.0 + radius, 1.0, note=f"radius={radius:g}")
        if mu is None:
            return cls(SQUARED, 1.0, 1.0, note="uncertified (no mu given)")
        if rho_sq is not None:
            shrink = math.sqrt(10.0 * rho_sq) / mu
            if shrink < 1.0:
                return cls(SQUARED, 1.0 / (1.0 - shrink), 1.0, note="iterate-ball fixed point")
        r = 1.0 / math.sqrt(mu)
        return cls(SQUARED, 1.0 + r, 1.0, note=f"sublevel radius 1/sqrt(mu)={r:g}")


def loss_value(loss, z):
    kind = loss.kind if isinstance(loss, LossSpec) else loss
    z = np.asarray(z, dtype=np.float64)
    if kind == HINGE:
        out = np.maximum(0.0, 1.0 - z)
    elif kind == SQUARED:
        out = 0.5 * (1.0 - z) ** 2
    else:
        raise InvalidArgumentError(f"unknown loss {kind!r}")
    return float(out) if out.ndim == 0 else out


def loss_derivative(loss, z):
    """``dl/dz`` with the hinge kink at ``z = 1`` mapped to 0."""
    kind = loss.kind if isinstance(loss, LossSpec) else loss
    z = np.asarray(z, dtype=np.float64)
    if kind == HINGE:
        out = np.where(z < 1.0, -1.0, 0.0)
    else:
        out = z - 1.0
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class Subgradient:
    """``coef * x + mu * w``, kept apart so the sparse part stays sparse."""

    coef: float
    x: object
    mu: float
    w: np.ndarray

    def to_dense(self) -> np.ndarray:
        out = self.mu * np.asarray(self.w, dtype=np.float64)
        if self.coef:
            out[self.x.indices] += self.coef * self.x.values
        return out


@dataclass(frozen=True)
class Objective:
    loss: LossSpec
    mu: float
    data: object

    def __post_init__(self):
        if not self.mu > 0:
            raise InvalidArgumentError("mu must be positive")

    def margins(self, W):
        """Margins for one iterate (1-d) or one per row of ``W`` (N x rows)."""
        W = np.asarray(W, dtype=np.float64)
        return self.data.y[:, None] * (self.data.X @ W.T) if W.ndim == 2 else self.data.y * (self.data.X @ W)

    def value(self, w) -> float:
        w = np.asarray(w, dtype=np.float64)
        self._check_dim(w.shape[-1])
        reg = 0.5 * self.mu * float(w @ w)
        if self.data.N == 0:
            return reg
        return float(np.mean(loss_value(self.loss, self.margins(w)))) + reg

    def values(self, W) -> np.ndarray:
        """Objective at each row of ``W``."""
        W = np.atleast_2d(np.asarray(W, dtype=np.float64))
        self._check_dim(W.shape[1])
        reg = 0.5 * self.mu * np.einsum("ij,ij->i", W, W)
        if self.data.N == 0:
            return reg
        return np.mean(loss_value(self.loss, self.margins(W)), axis=0) + reg

    def subgradient(self, w) -> np.ndarray:
        """Deterministic (sub)gradient of the objective, same kink rule as the samples."""
        w = np.asarray(w, dtype=np.float64)
        self._check_dim(w.size)
        if self.data.N == 0:
            return self.mu * w
        coef = loss_derivative(self.loss, self.margins(w)) * self.data.y
        return np.asarray(self.data.X.T @ coef).ravel() / self.data.N + self.mu * w

    def full_gradient(self, w) -> np.ndarray:
        if not self.loss.differentiable:
            raise UnsupportedError("full gradient needs a differentiable loss; hinge has a kink")
        return self.subgradient(w)

    def stochastic_subgradient(self, w, x, y) -> Subgradient:
        w = np.asarray(w, dtype=np.float64)
        if x.dimension != w.size:
            raise InvalidArgumentError(f"example has dimension {x.dimension}, iterate {w.size}")
        z = y * x.dot(w)
        return Subgradient(float(loss_derivative(self.loss, z)) * y, x, self.mu, w)

    def _check_dim(self, d):
        if d != self.data.d:
            raise InvalidArgumentError(f"iterate has dimension {d}, data {self.data.d}")


def stochastic_subgradient(obj: Objective, w, example):
    x, y = example
    return obj.stochastic_subgradient(w, x, y)


def objective_value(obj: Objective, w) -> float:
    return obj.value(w)


def full_gradient(obj: Objective, w):
    return obj.full_gradient(w)
