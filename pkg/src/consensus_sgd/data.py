"""Datasets: libsvm parsing, synthetic generators, normalization and sharding.

A :class:`Dataset` keeps its examples as a CSR matrix (one row per example)
plus a vector of +/-1 labels.  Single examples are exposed as
:class:`SparseVector` for the few call sites that want one at a time.
"""
from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy import special, stats

from .errors import GenerationError, InvalidArgumentError, ParseError


@dataclass(frozen=True)
class SparseVector:
    dimension: int
    indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        val = np.asarray(self.values, dtype=np.float64)
        if idx.shape != val.shape:
            raise InvalidArgumentError("indices and values differ in length")
        if idx.size and (idx[0] < 0 or idx[-1] >= self.dimension or np.any(np.diff(idx) <= 0)):
            raise InvalidArgumentError("indices must be strictly increasing and < dimension")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", val)

    @classmethod
    def from_dense(cls, x):
        x = np.asarray(x, dtype=np.float64)
        (idx,) = np.nonzero(x)
        return cls(x.size, idx, x[idx])

    def norm(self) -> float:
        return float(np.linalg.norm(self.values))

    def dot(self, w) -> float:
        return float(self.values @ np.asarray(w)[self.indices])

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.dimension)
        out[self.indices] = self.values
        return out


class Dataset:
    """Labeled examples ``(x_i, y_i)`` with ``y_i`` in {-1, +1}.

    Parameters
    ----------
    X : sparse matrix or ndarray, shape (N, d)
    y : array_like, shape (N,)
    meta : dict, optional
        Free-form provenance (seed, generator, normalization flag, ...).
    """

    def __init__(self, X, y, meta=None):
        X = sp.csr_matrix(X, dtype=np.float64)
        X.sort_indices()
        y = np.asarray(y, dtype=np.float64).reshape(-1)
        if X.shape[0] != y.shape[0]:
            raise InvalidArgumentError(f"{X.shape[0]} rows but {y.shape[0]} labels")
        if y.size and not np.all(np.abs(y) == 1.0):
            raise InvalidArgumentError("labels must be -1 or +1")
        self.X = X
        self.y = y
        self.meta = dict(meta or {})

    @property
    def N(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @property
    def nnz(self) -> int:
        return self.X.nnz

    def __len__(self):
        return self.N

    def __repr__(self):
        return f"Dataset(N={self.N}, d={self.d}, nnz={self.nnz})"

    def example(self, i):
        lo, hi = self.X.indptr[i], self.X.indptr[i + 1]
        x = SparseVector(self.d, self.X.indices[lo:hi].copy(), self.X.data[lo:hi].copy())
        return x, float(self.y[i])

    def subset(self, rows) -> "Dataset":
        rows = np.asarray(rows, dtype=np.int64)
        return Dataset(self.X[rows], self.y[rows], meta=self.meta)

    def row_norms(self) -> np.ndarray:
        return np.sqrt(np.asarray(self.X.multiply(self.X).sum(axis=1)).ravel())

    def metadata(self, rho_sq=None) -> dict:
        out = {"N": self.N, "d": self.d, "nnz": self.nnz, "seed": self.meta.get("seed")}
        if rho_sq is not None:
            out["rho_sq"] = float(rho_sq)
        return out

    def equals(self, other) -> bool:
        if self.X.shape != other.X.shape:
            return False
        a, b = self.X.copy(), other.X.copy()
        a.eliminate_zeros()
        b.eliminate_zeros()
        return (
            np.array_equal(a.indptr, b.indptr)
            and np.array_equal(a.indices, b.indices)
            and np.array_equal(a.data, b.data)
            and np.array_equal(self.y, other.y)
        )


# ---------------------------------------------------------------------------
# libsvm text format

def parse_label_map(spec: str) -> dict:
    """Parse ``"a:+1,b:-1"`` into ``{a: 1, b: -1}``."""
    out = {}
    for item in spec.split(","):
        item = item.strip()
        if not item:
            continue
        try:
            src, dst = item.rsplit(":", 1)
            src_v, dst_v = float(src), int(float(dst))
        except ValueError:
            raise InvalidArgumentError(f"bad label-map entry {item!r}") from None
        if dst_v not in (-1, 1):
            raise InvalidArgumentError(f"label-map target must be +1 or -1, got {dst}")
        out[src_v] = dst_v
    return out


def parse_libsvm(stream, dimension=None, label_map=None) -> Dataset:
    """Read ``<label> <idx>:<val> ...`` lines into a :class:`Dataset`.

    Indices in the file are 1-based and must increase strictly within a
    line.  Labels must be binary: {-1, +1} are kept, {1, 2} become
    {+1, -1}; any other label set needs an explicit ``label_map``.
    ``dimension`` overrides the inferred ``max index + 1`` (it may not be
    smaller).
    """
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    labels, label_lines = [], []
    indptr, indices, values = [0], [], []
    max_idx = -1
    for lineno, raw in enumerate(stream, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        try:
            labels.append(float(tokens[0]))
        except ValueError:
            raise ParseError(f"non-numeric label {tokens[0]!r}", lineno) from None
        label_lines.append(lineno)
        prev = -1
        for tok in tokens[1:]:
            idx_s, sep, val_s = tok.partition(":")
            if not sep:
                raise ParseError(f"malformed pair {tok!r}", lineno)
            try:
                idx = int(idx_s)
                val = float(val_s)
            except ValueError:
                raise ParseError(f"non-numeric pair {tok!r}", lineno) from None
            if idx < 1:
                raise ParseError(f"index {idx} is not 1-based", lineno)
            idx -= 1
            if idx <= prev:
                raise ParseError(f"indices not strictly increasing at {tok!r}", lineno)
            prev = idx
            indices.append(idx)
            values.append(val)
        max_idx = max(max_idx, prev)
        indptr.append(len(indices))

    d = max_idx + 1
    if dimension is not None:
        if dimension < d:
            raise ParseError(f"forced dimension {dimension} < max index {d}")
        d = dimension
    y = _map_labels(np.asarray(labels), label_lines, label_map)
    X = sp.csr_matrix(
        (np.asarray(values, dtype=np.float64), np.asarray(indices, dtype=np.int64), np.asarray(indptr, dtype=np.int64)),
        shape=(len(labels), max(d, 0)),
    )
    return Dataset(X, y)


def _map_labels(raw, lines, label_map):
    if label_map is not None:
        out = np.empty(raw.size)
        for k, v in enumerate(raw):
            if v not in label_map:
                raise ParseError(f"label {v:g} not in label map", lines[k])
            out[k] = label_map[v]
        return out
    present = set(np.unique(raw).tolist())
    if present <= {-1.0, 1.0}:
        return raw.copy()
    if present <= {1.0, 2.0}:
        return np.where(raw == 1.0, 1.0, -1.0)
    outside = [k for k, v in enumerate(raw) if v not in (-1.0, 1.0, 2.0)]
    # otherwise the file mixes -1 with 2
    bad = outside[0] if outside else int(np.argmax(raw == 2.0))
    raise ParseError(f"label {raw[bad]:g} is not binary; pass a label map", lines[bad])


def serialize_libsvm(data: Dataset, stream=None):
    """Write ``data`` in libsvm format; returns the text if no stream given."""
    own = stream is None
    if own:
        stream = io.StringIO()
    X = data.X
    for i in range(data.N):
        lo, hi = X.indptr[i], X.indptr[i + 1]
        parts = ["+1" if data.y[i] > 0 else "-1"]
        parts += [f"{j + 1}:{v!r}" for j, v in zip(X.indices[lo:hi].tolist(), X.data[lo:hi].tolist())]
        stream.write(" ".join(parts) + "\n")
    if own:
        return stream.getvalue()


def load_libsvm(path, dimension=None, label_map=None) -> Dataset:
    with open(path) as fh:
        data = parse_libsvm(fh, dimension=dimension, label_map=label_map)
    data.meta["path"] = str(path)
    return data


def write_metadata(data: Dataset, path, rho_sq=None):
    with open(path, "w") as fh:
        json.dump(data.metadata(rho_sq), fh, indent=2, sort_keys=True)


# ---------------------------------------------------------------------------
# transforms and generators

def normalize(data: Dataset) -> Dataset:
    """Scale every example by ``1/max(1, ||x||)`` so that ``||x|| <= 1``."""
    norms = data.row_norms()
    scale = 1.0 / np.maximum(1.0, norms)
    noop = bool(np.all(scale == 1.0))
    X = data.X if noop else sp.diags(scale) @ data.X
    meta = dict(data.meta, normalize_noop=noop)
    return Dataset(X, data.y, meta=meta)


def _random_unit(rng, d):
    v = rng.standard_normal(d)
    return v / np.linalg.norm(v)


def _hyperplane_labels(X, w_h):
    s = np.asarray(X @ w_h).ravel()
    return np.where(s >= 0, 1.0, -1.0)


def synth_gaussian_classification(N, d, seed, margin_scale=0.0) -> Dataset:
    """Gaussian points labelled by a random hyperplane through the origin.

    Draws ``x ~ N(0, I/d)``, pushes each point ``margin_scale`` further away
    from the hyperplane on its own side (0 keeps the plain Gaussian), then
    normalizes to the unit ball.
    """
    if N < 1 or d < 1:
        raise InvalidArgumentError("N and d must be >= 1")
    stream = GaussianStream(d, seed, margin_scale)
    X, y = stream.draw(np.random.default_rng([seed, 1]), N)
    return Dataset(X, y, meta={"seed": seed, "generator": "gaussian", "margin_scale": margin_scale})


class GaussianStream:
    """Endless source of Gaussian classification examples.

    The hyperplane is fixed by ``seed``; points come from whatever
    generator is passed to :meth:`draw`, so several consumers can read
    independent streams of the same distribution.
    """

    def __init__(self, d, seed, margin_scale=0.0):
        self.d = int(d)
        self.margin_scale = float(margin_scale)
        self.hyperplane = _random_unit(np.random.default_rng([seed, 0]), self.d)

    def draw(self, rng, count):
        X = rng.standard_normal((count, self.d)) / math.sqrt(self.d)
        side = np.where(X @ self.hyperplane >= 0, 1.0, -1.0)
        if self.margin_scale:
            X += self.margin_scale * side[:, None] * self.hyperplane[None, :]
        X /= np.maximum(1.0, np.linalg.norm(X, axis=1))[:, None]
        return X, side

    def population_moments(self):
        """Exact ``(s, c)`` with ``E[x x^T] = s I`` and ``E[y x] = c * hyperplane``.

        Only valid for ``margin_scale == 0``, where the normalized
        distribution is rotation invariant and both moments reduce to
        chi-square integrals.
        """
        if self.margin_scale:
            raise InvalidArgumentError("closed-form moments need margin_scale == 0")
        d = self.d
        tail = stats.chi2.sf(d, d)
        mean_r2 = stats.chi2.cdf(d, d + 2) + tail
        mean_sqrt_chi = math.sqrt(2.0) * math.exp(special.gammaln((d + 1) / 2) - special.gammaln(d / 2))
        mean_r = mean_sqrt_chi * stats.chi2.cdf(d, d + 1) / math.sqrt(d) + tail
        mean_abs_u1 = math.exp(special.gammaln(d / 2) - special.gammaln((d + 1) / 2)) / math.sqrt(math.pi)
        return mean_r2 / d, mean_r * mean_abs_u1


def synth_controlled_rho(N, d, target_rho_sq, seed, tol=0.10, retries=5) -> Dataset:
    """Unit-norm data whose second-moment spectral norm is ``target_rho_sq``.

    Each point is ``s*sqrt(a)*u + sqrt(1-a)*v`` with a shared direction
    ``u``, a random sign ``s`` and ``v`` uniform on the unit sphere of the
    complement of ``u``.  Its second moment is
    ``a u u^T + (1-a)/(d-1) (I - u u^T)``, whose top eigenvalue equals ``a``
    whenever ``a >= 1/d``.  Labels come from a random hyperplane.
    """
    from .spectral import estimate_spectral_norm

    if d < 1 or N < 1:
        raise InvalidArgumentError("N and d must be >= 1")
    if not (1.0 / d - 1e-12 <= target_rho_sq <= 1.0):
        raise InvalidArgumentError(f"target rho^2 must lie in [1/d, 1], got {target_rho_sq}")
    a = float(target_rho_sq)
    achieved = None
    for attempt in range(retries):
        rng = np.random.default_rng([seed, attempt])
        u = _random_unit(rng, d)
        w_h = _random_unit(rng, d)
        s = rng.choice([-1.0, 1.0], size=N)
        if d > 1:
            V = rng.standard_normal((N, d))
            V -= np.outer(V @ u, u)
            V /= np.linalg.norm(V, axis=1)[:, None]
        else:
            V = np.zeros((N, d))
        X = math.sqrt(a) * s[:, None] * u[None, :] + math.sqrt(1.0 - a) * V
        data = Dataset(X, _hyperplane_labels(X, w_h), meta={"seed": seed, "generator": "controlled_rho", "target_rho_sq": a})
        achieved = estimate_spectral_norm(data, seed=seed).rho_sq
        if abs(achieved - a) <= tol * a:
            data.meta["rho_sq"] = achieved
            data.meta["attempt"] = attempt
            return data
    raise GenerationError(f"could not reach rho^2={a} within {tol:.0%} (last {achieved})", achieved)


@dataclass
class Shards:
    """An even random split of a dataset over ``m`` nodes.

    ``indices[i]`` holds the rows of ``parent`` owned by node ``i``; the
    ``dropped`` leftover rows (``N mod m``) belong to no node.
    """

    parent: Dataset
    indices: np.ndarray
    seed: int
    dropped: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))

    @property
    def m(self) -> int:
        return self.indices.shape[0]

    @property
    def n(self) -> int:
        return self.indices.shape[1]

    def shard(self, i) -> Dataset:
        return self.parent.subset(self.indices[i])

    def metadata(self) -> dict:
        return {"m": self.m, "n": self.n, "dropped": int(self.dropped.size), "seed": self.seed}


def split_uniform(data: Dataset, m: int, seed: int) -> Shards:
    if m < 1:
        raise InvalidArgumentError("m must be >= 1")
    if data.N < m:
        raise InvalidArgumentError(f"cannot split {data.N} examples over {m} nodes")
    n = data.N // m
    perm = np.random.default_rng(seed).permutation(data.N)
    return Shards(data, perm[: m * n].reshape(m, n).copy(), seed, perm[m * n :].copy())
