"""Closed-form suboptimality and network-error bounds with their preconditions.

Bounds are diagnostics: a report always carries a value, and every
precondition is listed with the required and actual quantities.  A report
with any failed precondition has ``guaranteed == False``.

The three suboptimality bounds share the shape::

    (1/m + K * sqrt(m * rho^a) * log(S) / (1 - sqrt(lambda_2))) * L^2/mu * log(S)/T

with ``K = 100, a = 2, S = T`` for constant and i.i.d. communication and
``K = 200 sqrt(5), a = 4, S = nu T`` for the mini-batch scheme.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

from .errors import InvalidArgumentError

E = math.e


@dataclass(frozen=True)
class BoundInputs:
    m: int
    n: int
    d: int
    T: float
    mu: float
    L: float
    rho_sq: float
    lambda2: float
    nu: float | None = None

    def __post_init__(self):
        for name in ("m", "n", "d", "T", "mu", "L"):
            if not getattr(self, name) > 0:
                raise InvalidArgumentError(f"{name} must be positive")
        if not 0.0 <= self.lambda2 < 1.0:
            raise InvalidArgumentError(f"lambda2 must lie in [0, 1), got {self.lambda2}")
        if not 0.0 < self.rho_sq <= 1.0:
            raise InvalidArgumentError(f"rho_sq must lie in (0, 1], got {self.rho_sq}")
        if self.nu is not None and not 0.0 < self.nu <= 1.0:
            raise InvalidArgumentError(f"nu must lie in (0, 1], got {self.nu}")

    @property
    def rho(self) -> float:
        return math.sqrt(self.rho_sq)

    @property
    def log_inv_lambda2(self) -> float:
        return math.log(1.0 / self.lambda2) if self.lambda2 > 0 else math.inf

    @property
    def b_half(self) -> float:
        """``(1/2) log(1/lambda_2)``, the exponent in the network-error lemma."""
        return 0.5 * self.log_inv_lambda2

    @property
    def b_full(self) -> float:
        """``log(1/lambda_2)``, the form substituted at the end of the main proof."""
        return self.log_inv_lambda2


@dataclass(frozen=True)
class Precondition:
    name: str
    required: float
    actual: float
    ok: bool


@dataclass
class BoundReport:
    value: float
    formula: str
    preconditions: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    @property
    def guaranteed(self) -> bool:
        return all(p.ok for p in self.preconditions)

    def to_dict(self) -> dict:
        return {
            "formula": self.formula,
            "value": _json_float(self.value),
            "guaranteed": self.guaranteed,
            "status": "ok" if self.guaranteed else "bound not guaranteed (precondition failed)",
            "preconditions": [
                {"name": p.name, "required": _json_float(p.required), "actual": _json_float(p.actual), "ok": p.ok}
                for p in self.preconditions
            ],
            "notes": list(self.notes),
        }


def _json_float(x):
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def _greater(name, actual, required):
    return Precondition(name, required, actual, bool(actual > required))


def _rate(inp, const, rho_power, horizon):
    lh = math.log(horizon)
    penalty = const * math.sqrt(inp.m * inp.rho_sq ** (rho_power / 2)) * lh / (1.0 - math.sqrt(inp.lambda2))
    return (1.0 / inp.m + penalty) * inp.L ** 2 / inp.mu * lh / inp.T


def _common(inp, name_lambda, time_ratio_second):
    lemma_n = 4.0 / (3.0 * inp.rho_sq) * math.log(inp.d)
    lg = inp.log_inv_lambda2
    T_first = 2.0 * E * 0.5 * lg
    T_over_log = inp.T / math.log(inp.T) if inp.T > 1 else math.inf
    pre = [
        _greater("n > 4/(3 rho^2) log d", inp.n, lemma_n),
        _greater(f"T > 2e log(1/sqrt({name_lambda}))", inp.T, T_first),
        _greater("T/log T > max(4/(3 rho^2) log d, network term)", T_over_log, max(lemma_n, time_ratio_second)),
    ]
    notes = []
    if inp.lambda2 == 0.0:
        notes.append("single-node/complete-graph regime; lambda_2 = 0 makes the iteration condition degenerate")
    return pre, notes


def theorem1_bound(inp: BoundInputs) -> BoundReport:
    """Constant communication ``P(t) = P``; ``inp.lambda2`` is ``lambda_2(P)``."""
    second = (8.0 / 5.0) ** 0.25 * math.sqrt(inp.m / inp.rho) / inp.log_inv_lambda2
    pre, notes = _common(inp, "lambda2(P)", second)
    return BoundReport(_rate(inp, 100.0, 2, inp.T), "theorem1", pre, notes)


def theorem2_bound(inp: BoundInputs) -> BoundReport:
    """i.i.d. communication; ``inp.lambda2`` must be ``lambda_2(E[P(t)^2])``."""
    second = math.sqrt(8.0 / 5.0) * math.sqrt(inp.m / inp.rho_sq) / inp.log_inv_lambda2
    pre, notes = _common(inp, "lambda2(E[P^2])", second)
    return BoundReport(_rate(inp, 100.0, 2, inp.T), "theorem2", pre, notes)


def theorem3_bound(inp: BoundInputs) -> BoundReport:
    """Mini-batch scheme with ``1/nu`` samples per communication round."""
    if inp.nu is None:
        raise InvalidArgumentError("theorem3_bound needs nu")
    nu = inp.nu
    lemma_n = 4.0 / (3.0 * inp.rho_sq) * math.log(inp.d)
    lg = inp.log_inv_lambda2
    horizon = nu * inp.T
    ratio = inp.T / math.log(horizon) if horizon > 1 else math.inf
    second = (8.0 / 5.0) ** 0.25 * math.sqrt(inp.m / inp.rho_sq) / lg
    pre = [
        _greater("n > 4/(3 rho^2) log d", inp.n, lemma_n),
        _greater("T > (2e/nu) log(1/sqrt(lambda2))", inp.T, 2.0 * E / nu * 0.5 * lg),
        _greater("T/log(nu T) > max(4/(3 nu rho^2) log d, network term)", ratio, max(lemma_n / nu, second)),
        _greater("1/nu > 4/(3 rho^2) log d", 1.0 / nu, lemma_n),
    ]
    notes = []
    if horizon <= 1:
        notes.append("nu T <= 1: log(nu T) is not positive, value is not meaningful")
    if inp.lambda2 == 0.0:
        notes.append("single-node/complete-graph regime; lambda_2 = 0 makes the iteration condition degenerate")
    value = _rate(inp, 200.0 * math.sqrt(5.0), 4, horizon)
    return BoundReport(value, "theorem3", pre, notes)


def minibatch_batch_size(rho_sq, d) -> int:
    """Smallest integer batch ``1/nu`` meeting ``1/nu > 4/(3 rho^2) log d``."""
    return math.ceil(4.0 / (3.0 * rho_sq) * math.log(d)) + 1


def network_error_bound(t, m, L, mu, lambda2) -> float:
    """``(2 L sqrt(m) / mu) * log(2 b e t^2) / (b t)`` with ``b = (1/2) log(1/lambda_2)``.

    ``lambda2 = 0`` means the network averages exactly in one step; the
    bound is then reported as 0 with a warning.
    """
    if t < 1:
        raise InvalidArgumentError("t must be >= 1")
    if not 0.0 <= lambda2 < 1.0:
        raise InvalidArgumentError(f"lambda2 must lie in [0, 1), got {lambda2}")
    if lambda2 == 0.0:
        warnings.warn("lambda_2 = 0: instant mixing, network error bound taken as 0", RuntimeWarning, stacklevel=2)
        return 0.0
    b = 0.5 * math.log(1.0 / lambda2)
    return 2.0 * L * math.sqrt(m) / mu * math.log(2.0 * b * E * t * t) / (b * t)


def regime_classify(m, rho_sq) -> str:
    """Which of the three regimes ``m`` falls in for data with spectral norm ``rho_sq``.

    ``a``: m <= rho^(-2/3); ``b``: rho^(-2/3) < m <= rho^(-2); ``c``: beyond.
    """
    if not 0.0 < rho_sq <= 1.0:
        raise InvalidArgumentError("rho_sq must lie in (0, 1]")
    rho = math.sqrt(rho_sq)
    if m <= rho ** (-2.0 / 3.0):
        return "a"
    if m <= 1.0 / rho_sq:
        return "b"
    return "c"
