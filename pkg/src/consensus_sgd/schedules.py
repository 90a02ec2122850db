"""Which mixing matrix the nodes use at each round.

Four regimes: always communicate (:class:`Constant`), communicate with
probability ``nu`` (:class:`IidBernoulli`), communicate every round but
aggregate a batch of ``b`` samples first (:class:`MiniBatchPeriodic`), and
communicate with a decaying probability ``min(1, C t^-p)``
(:class:`PowerLaw`).

Random schedules consume exactly one uniform draw per round from the
schedule's own generator, whether asked one round at a time
(:meth:`Schedule.matrix_at`) or in blocks (:meth:`Schedule.comm_flags`).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, UnsupportedScheduleError
from .topology import MixingMatrix

IDENTITY = "identity"  # no-communication token


class Schedule:
    kind = ""
    P: MixingMatrix

    def matrix_at(self, t, rng):
        if t < 1:
            raise InvalidArgumentError("rounds are numbered from 1")
        return self.P if self.comm_flags(t, 1, rng)[0] else IDENTITY

    def comm_flags(self, t0, count, rng) -> np.ndarray:
        """Communication indicators for rounds ``t0 .. t0+count-1``."""
        return np.ones(count, dtype=np.uint8)

    def expected_square(self) -> np.ndarray:
        raise UnsupportedScheduleError(f"{self.kind} schedule has no stationary E[P(t)^2]")

    @property
    def batch(self) -> int:
        return 1

    @property
    def stationary(self) -> bool:
        return False

    def to_config(self) -> dict:
        raise NotImplementedError


@dataclass
class Constant(Schedule):
    P: MixingMatrix
    kind = "constant"

    @property
    def stationary(self):
        return True

    def expected_square(self):
        return self.P.weights @ self.P.weights

    def to_config(self):
        return {"type": "constant"}


@dataclass
class IidBernoulli(Schedule):
    P: MixingMatrix
    nu: float
    kind = "iid"

    def __post_init__(self):
        if not 0.0 < self.nu <= 1.0:
            raise InvalidArgumentError(f"nu must lie in (0, 1], got {self.nu}")

    @property
    def stationary(self):
        return True

    def comm_flags(self, t0, count, rng):
        return (rng.random(count) < self.nu).astype(np.uint8)

    def expected_square(self):
        P2 = self.P.weights @ self.P.weights
        return (1.0 - self.nu) * np.eye(self.P.m) + self.nu * P2

    def to_config(self):
        return {"type": "iid", "nu": self.nu}


@dataclass
class MiniBatchPeriodic(Schedule):
    """Communicate every engine round; each round aggregates ``batch_size`` samples."""

    P: MixingMatrix
    batch_size: int
    kind = "minibatch"

    def __post_init__(self):
        if int(self.batch_size) != self.batch_size or self.batch_size < 1:
            raise InvalidArgumentError("batch size must be a positive integer")
        self.batch_size = int(self.batch_size)

    @classmethod
    def from_frequency(cls, P, nu):
        return cls(P, max(1, int(round(1.0 / nu))))

    @property
    def batch(self):
        return self.batch_size

    def to_config(self):
        return {"type": "minibatch", "batch": self.batch_size}


@dataclass
class PowerLaw(Schedule):
    P: MixingMatrix
    C: float
    p: float
    kind = "powerlaw"

    def __post_init__(self):
        if not (self.C > 0 and self.p > 0):
            raise InvalidArgumentError("C and p must be positive")

    def probability(self, t):
        t = np.asarray(t, dtype=np.float64)
        return np.minimum(1.0, self.C * t ** (-self.p))

    def comm_flags(self, t0, count, rng):
        t = np.arange(t0, t0 + count, dtype=np.float64)
        return (rng.random(count) < self.probability(t)).astype(np.uint8)

    def to_config(self):
        return {"type": "powerlaw", "C": self.C, "p": self.p}


def expected_square(s: Schedule) -> np.ndarray:
    return s.expected_square()


def matrix_at(s: Schedule, t, rng):
    return s.matrix_at(t, rng)


def schedule_from_config(cfg: dict, P: MixingMatrix) -> Schedule:
    """Build a schedule from its run-config JSON object."""
    kind = cfg.get("type", "constant")
    if kind == "constant":
        return Constant(P)
    if kind == "iid":
        return IidBernoulli(P, float(cfg["nu"]))
    if kind == "minibatch":
        if "batch" in cfg:
            return MiniBatchPeriodic(P, int(cfg["batch"]))
        return MiniBatchPeriodic.from_frequency(P, float(cfg["nu"]))
    if kind == "powerlaw":
        return PowerLaw(P, float(cfg["C"]), float(cfg["p"]))
    raise InvalidArgumentError(f"unknown schedule type {kind!r}")
