"""Round-synchronous simulator of consensus stochastic subgradient descent.

Each of ``m`` nodes starts at ``w_i(1) = 0``.  In round ``t`` every node
samples from its own shard (uniformly, with replacement), the nodes mix
their iterates with ``P(t)`` from the schedule, and each takes a step of
size ``1/(mu t)`` along its sampled subgradient evaluated at its pre-mixing
iterate.  The output of node ``i`` after ``T`` rounds is the running average
of ``w_i(1), ..., w_i(T)``.

Time convention for traces: row ``t`` describes the state *entering* round
``t``, i.e. the iterates ``w_i(t)`` and the averages over ``w_i(1..t)``.
``comm_count`` and ``samples_total`` count the rounds ``1..t-1`` that
produced that state.  Round ``T`` itself never influences the output, so it
is not simulated.

Randomness is split into independent streams: one per node for sampling
(seeded by ``(sampling, node)`` so adding nodes leaves existing paths
unchanged) and one for the schedule.  Streams are consumed in fixed-size
blocks, which makes traces independent of how rounds are chunked for the
kernels or where metrics are recorded.
"""
from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import _backend
from .errors import DivergenceError, InvalidArgumentError, UnsupportedError
from .objective import LossSpec, Objective
from .schedules import MiniBatchPeriodic, Schedule

SAMPLE_BLOCK = 4096  # rounds per draw from a node's sampling stream
_ROW_BUDGET = 1 << 20  # sampled rows handed to one kernel call
_DENSE_BUDGET = 1 << 22  # floats in one streamed data block
CSV_HEADER = ["t", "comm_count", "samples_total", "node", "J_polyak", "net_err", "norm_wbar"]


@dataclass(frozen=True)
class Seeds:
    split: int = 0
    sampling: int = 0
    schedule: int = 0


@dataclass
class RunConfig:
    m: int
    T: int
    mu: float
    loss: LossSpec
    schedule: Schedule
    seeds: Seeds = field(default_factory=Seeds)
    trace_stride: int = 0
    mode: str | None = None
    record_times: tuple = ()
    record_objective: bool = True
    record_last: bool = True
    debug: bool = False
    divergence_factor: float = 1e3

    def __post_init__(self):
        if self.T < 1:
            raise InvalidArgumentError("T must be >= 1")
        if self.m < 1:
            raise InvalidArgumentError("m must be >= 1")
        if not self.mu > 0:
            raise InvalidArgumentError("mu must be positive")
        if self.schedule.P.m != self.m:
            raise InvalidArgumentError(f"schedule matrix is {self.schedule.P.m}x{self.schedule.P.m}, m={self.m}")
        minibatch = isinstance(self.schedule, MiniBatchPeriodic)
        if self.mode is None:
            self.mode = "minibatch" if minibatch else "per-step"
        if self.mode not in ("per-step", "minibatch"):
            raise InvalidArgumentError(f"unknown mode {self.mode!r}")
        if self.mode == "minibatch" and not minibatch:
            raise InvalidArgumentError("minibatch mode needs a MiniBatchPeriodic schedule")
        if self.mode == "per-step" and minibatch and self.schedule.batch != 1:
            raise InvalidArgumentError("per-step mode with a batch schedule; use run_minibatch")

    @property
    def batch(self) -> int:
        return self.schedule.batch

    def record_points(self) -> np.ndarray:
        pts = set(int(t) for t in self.record_times if 1 <= t <= self.T)
        if self.trace_stride > 0:
            pts.update(range(self.trace_stride, self.T + 1, self.trace_stride))
        pts.add(self.T)
        return np.array(sorted(pts), dtype=np.int64)

    def describe(self) -> dict:
        return {
            "m": self.m,
            "T": self.T,
            "mu": self.mu,
            "loss": self.loss.kind,
            "L": self.loss.lipschitz,
            "schedule": self.schedule.to_config(),
            "seeds": {"split": self.seeds.split, "sampling": self.seeds.sampling, "schedule": self.seeds.schedule},
            "mode": self.mode,
            "trace_stride": self.trace_stride,
        }


@dataclass
class RunTrace:
    t: np.ndarray
    comm_count: np.ndarray
    samples_total: np.ndarray
    J_polyak: np.ndarray
    J_last: np.ndarray
    net_err_nodes: np.ndarray
    norm_wbar: np.ndarray
    polyak: np.ndarray
    iterates: np.ndarray
    wall_time: float
    config: dict
    backend: str
    J_star: float | None = None
    average_deviation: float | None = None

    @property
    def net_err(self) -> np.ndarray:
        """``max_i ||wbar(t) - w_i(t)||`` per recorded time."""
        return self.net_err_nodes.max(axis=1)

    def gap(self, J_star=None) -> np.ndarray:
        J_star = self.J_star if J_star is None else J_star
        if J_star is None:
            raise InvalidArgumentError("no reference optimum attached")
        return self.J_polyak - J_star

    def write_csv(self, stream=None):
        own = stream is None
        if own:
            stream = io.StringIO()
        w = csv.writer(stream, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in range(self.t.size):
            for i in range(self.J_polyak.shape[1]):
                w.writerow([
                    int(self.t[r]), int(self.comm_count[r]), int(self.samples_total[r]), i,
                    repr(float(self.J_polyak[r, i])), repr(float(self.net_err_nodes[r, i])),
                    repr(float(self.norm_wbar[r])),
                ])
        if own:
            return stream.getvalue()


def node_sample_indices(seed, node, n, count, b=1):
    """The first ``count`` rounds of local indices node ``node`` draws."""
    s = _NodeStream(seed, node, n, b)
    return s.take(count)


class _NodeStream:
    def __init__(self, seed, node, n, b):
        self.rng = np.random.default_rng([seed, node])
        self.n, self.b = n, b
        self.buf = np.empty((0, b), dtype=np.int64)

    def take(self, count):
        while self.buf.shape[0] < count:
            fresh = self.rng.integers(0, self.n, size=SAMPLE_BLOCK * self.b).reshape(SAMPLE_BLOCK, self.b)
            self.buf = np.concatenate([self.buf, fresh])
        out, self.buf = self.buf[:count], self.buf[count:]
        return out


class ShardSampler:
    """Draws rows of the parent dataset for each node from its own shard."""

    def __init__(self, shards, seed, b):
        self.shards = shards
        self.streams = [_NodeStream(seed, i, shards.n, b) for i in range(shards.m)]
        X = shards.parent.X
        self.csr = (X.indptr.astype(np.int64), X.indices.astype(np.int64), X.data, shards.parent.y)

    @property
    def d(self):
        return self.shards.parent.d

    def take(self, count):
        rows = np.stack([self.shards.indices[i][s.take(count)] for i, s in enumerate(self.streams)], axis=1)
        return self.csr, np.ascontiguousarray(rows, dtype=np.int64)


class StreamSampler:
    """Fresh examples from a generator for every node (infinite-data emulation)."""

    def __init__(self, source, seed, m, b):
        self.source, self.m, self.b = source, m, b
        self.rngs = [np.random.default_rng([seed, i, 1]) for i in range(m)]
        self.block = max(1, min(SAMPLE_BLOCK, _DENSE_BUDGET // max(1, b * source.d)))
        self.bufs = [(np.empty((0, source.d)), np.empty(0)) for _ in range(m)]

    @property
    def d(self):
        return self.source.d

    def _take_node(self, i, count):
        X, y = self.bufs[i]
        need = count * self.b
        while y.size < need:
            Xn, yn = self.source.draw(self.rngs[i], self.block * self.b)
            X, y = np.concatenate([X, Xn]), np.concatenate([y, yn])
        self.bufs[i] = (X[need:], y[need:])
        return X[:need].reshape(count, self.b, -1), y[:need].reshape(count, self.b)

    def take(self, count):
        parts = [self._take_node(i, count) for i in range(self.m)]
        X = np.stack([p[0] for p in parts], axis=1).reshape(-1, self.d)
        y = np.stack([p[1] for p in parts], axis=1).reshape(-1)
        Xs = sp.csr_matrix(X)
        csr = (Xs.indptr.astype(np.int64), Xs.indices.astype(np.int64), Xs.data, y)
        rows = np.arange(count * self.m * self.b, dtype=np.int64).reshape(count, self.m, self.b)
        return csr, rows


def _chunk_limit(cfg, sampler):
    per_round = cfg.m * cfg.batch
    limit = _ROW_BUDGET // per_round
    if isinstance(sampler, StreamSampler):
        limit = min(limit, _DENSE_BUDGET // (per_round * sampler.d))
    return max(1, limit)


def run(config: RunConfig, shards=None, reference_opt=None, *, stream=None, evaluator=None, backend=None) -> RunTrace:
    """Simulate ``config.T`` rounds and return the recorded trace.

    Parameters
    ----------
    shards : Shards
        Per-node data; required unless ``stream`` is given.
    reference_opt : float or object with ``J_star``, optional
        Attached to the trace so ``trace.gap()`` works.
    stream : object with ``d`` and ``draw(rng, count)``, optional
        Sample fresh points instead of reading shards.
    evaluator : callable, optional
        Maps a ``(rows, d)`` array of iterates to objective values.
        Defaults to the global objective on ``shards.parent``.
    backend : {"compiled", "python"}, optional
        Kernel implementation; defaults to the one selected at import.
    """
    cfg = config
    kern = _backend.get(backend)
    b = cfg.batch
    if stream is not None:
        sampler = StreamSampler(stream, cfg.seeds.sampling, cfg.m, b)
    else:
        if shards is None:
            raise InvalidArgumentError("need shards or a stream")
        if shards.m != cfg.m:
            raise InvalidArgumentError(f"{shards.m} shards for m={cfg.m}")
        sampler = ShardSampler(shards, cfg.seeds.sampling, b)
    d = sampler.d
    if evaluator is None and (cfg.record_objective or cfg.record_last):
        if shards is None:
            raise InvalidArgumentError("streamed runs need an explicit evaluator")
        evaluator = Objective(cfg.loss, cfg.mu, shards.parent).values

    P = cfg.schedule.P.to_csr()
    p_csr = (P.indptr.astype(np.int64), P.indices.astype(np.int64), P.data.astype(np.float64))
    sched_rng = np.random.default_rng(cfg.seeds.schedule)
    guard = cfg.divergence_factor * cfg.loss.lipschitz / cfg.mu

    W = np.zeros((cfg.m, d))
    Wn = np.zeros_like(W)
    polyak = np.zeros_like(W)
    points = cfg.record_points()
    R = points.size
    rec = {
        "comm": np.zeros(R, dtype=np.int64),
        "J_polyak": np.full((R, cfg.m), np.nan),
        "J_last": np.full((R, cfg.m), np.nan),
        "dev": np.zeros((R, cfg.m)),
        "norm_wbar": np.zeros(R),
    }
    comm_total = 0
    max_dev = 0.0 if cfg.debug else None
    limit = 1 if cfg.debug else _chunk_limit(cfg, sampler)
    t = 1
    started = time.perf_counter()
    for k, target in enumerate(points):
        while t < target:
            count = int(min(target - t, limit))
            csr, rows = sampler.take(count)
            comm = cfg.schedule.comm_flags(t, count, sched_rng)
            if cfg.debug:
                wbar = W.mean(axis=0)
                gbar = _mean_gradient(W, csr, rows[0], cfg)
            swapped, bad = kern.consensus_rounds(
                W, Wn, polyak, csr[0], csr[1], csr[2], csr[3], rows, comm,
                p_csr[0], p_csr[1], p_csr[2], t, cfg.mu, cfg.loss.code, guard,
            )
            if swapped:
                W, Wn = Wn, W
            if bad >= 0:
                raise DivergenceError(
                    f"iterate norm exceeded {guard:.3g} or became non-finite in round {t + bad}",
                    round_index=t + bad,
                )
            if cfg.debug:
                predicted = wbar - gbar / (cfg.mu * t)
                dev = np.linalg.norm(W.mean(axis=0) - predicted) / (1.0 + np.linalg.norm(wbar))
                max_dev = max(max_dev, float(dev))
            comm_total += int(comm.sum())
            t += count
        wbar = W.mean(axis=0)
        rec["dev"][k] = np.linalg.norm(W - wbar, axis=1)
        rec["norm_wbar"][k] = np.linalg.norm(wbar)
        rec["comm"][k] = comm_total
        if cfg.record_objective:
            rec["J_polyak"][k] = evaluator((polyak + W) / t)
        if cfg.record_last:
            rec["J_last"][k] = evaluator(W)
    wall = time.perf_counter() - started

    J_star = getattr(reference_opt, "J_star", reference_opt)
    return RunTrace(
        t=points,
        comm_count=rec["comm"],
        samples_total=(points - 1) * b,
        J_polyak=rec["J_polyak"],
        J_last=rec["J_last"],
        net_err_nodes=rec["dev"],
        norm_wbar=rec["norm_wbar"],
        polyak=(polyak + W) / cfg.T,
        iterates=W.copy(),
        wall_time=wall,
        config=cfg.describe(),
        backend=_backend.NAME if backend is None else backend,
        J_star=None if J_star is None else float(J_star),
        average_deviation=max_dev,
    )


def run_minibatch(config: RunConfig, shards=None, **kwargs) -> RunTrace:
    """Mini-batch variant: ``t`` counts communication rounds of ``b`` samples each."""
    if not isinstance(config.schedule, MiniBatchPeriodic):
        raise InvalidArgumentError("run_minibatch needs a MiniBatchPeriodic schedule")
    return run(config, shards, **kwargs)


def _mean_gradient(W, csr, rows, cfg):
    # independent re-evaluation of the round's sampled subgradients
    indptr, indices, data, y = csr
    m, b = rows.shape
    X = sp.csr_matrix((data, indices, indptr), shape=(len(indptr) - 1, W.shape[1]))
    xs = X[rows.reshape(-1)].toarray().reshape(m, b, -1)
    lab = y[rows]
    z = lab * np.einsum("mbd,md->mb", xs, W)
    if cfg.loss.kind == "hinge":
        coef = np.where(z < 1.0, -lab, 0.0)
    else:
        coef = (z - 1.0) * lab
    g = np.einsum("mb,mbd->md", coef, xs) / b + cfg.mu * W
    return g.mean(axis=0)


def average_iterate_check(trace: RunTrace) -> float:
    """Largest relative violation of ``wbar(t+1) = wbar(t) - eta_t mean_i g_i(t)``.

    Each round contributes ``||wbar(t+1) - wbar(t) + eta_t gbar|| / (1 + ||wbar(t)||)``.
    Needs a trace produced with ``debug=True``.
    """
    if trace.average_deviation is None:
        raise UnsupportedError("run the engine with debug=True to retain per-round gradients")
    return trace.average_deviation
