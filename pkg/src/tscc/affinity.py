"""Affinity tensors and their collapse to the weight matrix W = A A'.

The (d+2)-way tensor is never stored.  Affinities are cached once per
unordered index tuple (the tensor is super-symmetric), and W is assembled
from columns indexed by unordered (m-1)-subsets S of the data::

    W = (m-1)! * sum_S a_S a_S'      a_S[i] = A(i, S)

since every ordering of S produces the same column of the unfolding.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations, islice
from math import comb, factorial, perm as _perm

import numpy as np

from .curvature import (
    DISTINCT_RTOL,
    polar_curvature,
    polar_curvature_batch,
    polar_curvature_linear,
    polar_curvature_linear_batch,
)

__all__ = [
    "VARIANTS",
    "TensorSpec",
    "WeightMatrix",
    "perm",
    "affinity_value",
    "affinity_cache",
    "unfold",
    "weight_matrix",
    "perfect_weight_matrix",
    "deviation_norm",
    "save_weight_matrix",
    "load_weight_matrix",
]

VARIANTS = ("polar_affine", "polar_linear", "polar_power", "perfect")

DEFAULT_MAX_BYTES = 2 * 1024**3
DENSE_TENSOR_CAP = 10**6


def perm(n, r):
    """Number of ordered r-subsets of n items; 0 when r > n."""
    if n < 0 or r < 0:
        raise ValueError("perm needs nonnegative arguments")
    return _perm(n, r)


@dataclass(frozen=True)
class TensorSpec:
    """Which affinity tensor to build.

    ``q`` is only read by ``polar_power``; ``labels`` is required by
    ``perfect`` and ignored otherwise.
    """

    variant: str = "polar_affine"
    sigma: float = 1.0
    d: int = 1
    q: float = 1.0
    labels: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError("unknown tensor variant %r" % (self.variant,))
        if self.d < 0:
            raise ValueError("d must be nonnegative")
        if self.variant != "perfect" and not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if self.q < 1:
            raise ValueError("q must be >= 1")
        if self.variant == "perfect" and self.labels is None:
            raise ValueError("the perfect tensor needs ground-truth labels")

    @property
    def order(self):
        """Number of indices per tensor entry."""
        return self.d + 1 if self.variant == "polar_linear" else self.d + 2

    @property
    def power(self):
        return self.q if self.variant == "polar_power" else 1.0


@dataclass
class WeightMatrix:
    entries: np.ndarray
    degrees: np.ndarray

    @classmethod
    def from_entries(cls, entries):
        entries = np.asarray(entries, dtype=float)
        return cls(entries, entries.sum(axis=1))

    @property
    def n(self):
        return self.entries.shape[0]

    @property
    def isolated(self):
        """Indices of rows with zero degree."""
        return np.flatnonzero(self.degrees <= 0)


def _affinity_from_curvature(c, spec):
    return np.exp(-(c ** spec.power) / spec.sigma)


def affinity_value(spec, points, indices):
    """Single tensor entry ``A(i_1, ..., i_m)`` (0-based indices)."""
    indices = tuple(int(i) for i in indices)
    if len(indices) != spec.order:
        raise ValueError("expected %d indices, got %d" % (spec.order, len(indices)))
    if len(set(indices)) < len(indices):
        return 0.0
    if spec.variant == "perfect":
        labels = np.asarray(spec.labels)
        return float(len({labels[i] for i in indices}) == 1)
    pts = np.asarray(points, dtype=float)[list(indices)]
    if spec.variant == "polar_linear":
        c = polar_curvature_linear(pts)
    else:
        c = polar_curvature(pts)
    return float(_affinity_from_curvature(c, spec))


def _check_points(spec, points):
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2:
        raise ValueError("points must be an (N, D) array")
    n = pts.shape[0]
    if n < spec.order:
        raise ValueError("need at least %d points for d=%d, got %d" % (spec.order, spec.d, n))
    if spec.variant == "perfect":
        if len(spec.labels) != n:
            raise ValueError("labels length %d does not match N=%d" % (len(spec.labels), n))
        return pts
    # coincident data points make every tuple containing both undefined
    scale = DISTINCT_RTOL * (1.0 + np.abs(pts).max())
    order = np.lexsort(pts.T[::-1])
    gaps = np.linalg.norm(np.diff(pts[order], axis=0), axis=1)
    if gaps.size and gaps.min() < scale:
        raise ValueError("dataset contains repeated points")
    if spec.variant == "polar_linear" and np.linalg.norm(pts, axis=1).min() < scale:
        raise ValueError("the linear variant needs every point away from the origin")
    return pts


def _binomial_table(n, k):
    table = np.zeros((n + 1, k + 1), dtype=np.int64)
    for a in range(n + 1):
        for b in range(k + 1):
            table[a, b] = comb(a, b)
    return table


def _rank(sorted_tuples, table):
    """Colexicographic rank of sorted index tuples."""
    m = sorted_tuples.shape[-1]
    return sum(table[sorted_tuples[..., j], j + 1] for j in range(m))


def _chunks(iterable, size):
    it = iter(iterable)
    while True:
        block = list(islice(it, size))
        if not block:
            return
        yield np.array(block, dtype=np.int64)


def affinity_cache(spec, points, chunk_size=20000):
    """Affinity of every unordered m-subset, indexed by colex rank."""
    pts = _check_points(spec, points)
    n, m = pts.shape[0], spec.order
    values = np.empty(comb(n, m))
    labels = None if spec.variant != "perfect" else np.asarray(spec.labels)
    # combinations() emits lexicographic order; place each by its colex rank
    table = _binomial_table(n, m)
    for block in _chunks(combinations(range(n), m), chunk_size):
        ranks = _rank(block, table)
        if labels is not None:
            lab = labels[block]
            values[ranks] = np.all(lab == lab[:, :1], axis=1).astype(float)
            continue
        tuples = pts[block]
        if spec.variant == "polar_linear":
            c = polar_curvature_linear_batch(tuples)
        else:
            c = polar_curvature_batch(tuples)
        values[ranks] = _affinity_from_curvature(c, spec)
    return values


def _column_block(cache, subsets, n, table):
    """Columns a_S for a block of sorted (m-1)-subsets, shape (N, len(block))."""
    b = subsets.shape[0]
    rows = np.broadcast_to(np.arange(n)[:, None, None], (n, b, 1))
    full = np.concatenate([rows, np.broadcast_to(subsets, (n,) + subsets.shape)], axis=-1)
    full = np.sort(full, axis=-1)
    repeated = np.any(np.diff(full, axis=-1) == 0, axis=-1)
    ranks = np.where(repeated, 0, _rank(full, table))
    vals = cache[ranks]
    vals[repeated] = 0.0
    return vals


def _pairwise_sum(parts):
    parts = list(parts)
    if not parts:
        raise ValueError("nothing to reduce")
    while len(parts) > 1:
        nxt = [parts[i] + parts[i + 1] for i in range(0, len(parts) - 1, 2)]
        if len(parts) % 2:
            nxt.append(parts[-1])
        parts = nxt
    return parts[0]


def _memory_estimate(n, m, chunk_size):
    return 8 * (comb(n, m) + n * n + 4 * n * chunk_size * m)


def weight_matrix(spec, points, chunk_size=2048, workers=1, max_bytes=DEFAULT_MAX_BYTES):
    """Exact ``W = A A'`` for the unfolded tensor described by ``spec``.

    Column blocks are processed independently (optionally on ``workers``
    threads) and their partial products are combined by a fixed pairwise tree,
    so the result does not depend on the worker count.
    """
    pts = _check_points(spec, points)
    n, m = pts.shape[0], spec.order
    need = _memory_estimate(n, m, chunk_size)
    if need > max_bytes:
        raise MemoryError(
            "weight matrix for N=%d, order %d needs ~%.3g bytes (cap %d)" % (n, m, need, max_bytes)
        )
    cache = affinity_cache(spec, pts)
    table = _binomial_table(n, m)

    def partial(block):
        cols = _column_block(cache, block, n, table)
        return cols @ cols.T

    blocks = _chunks(combinations(range(n), m - 1), chunk_size)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(partial, blocks))
    else:
        parts = [partial(b) for b in blocks]
    w = _pairwise_sum(parts) * factorial(m - 1)
    w = 0.5 * (w + w.T)
    return WeightMatrix.from_entries(w)


def unfold(spec, points):
    """Materialize the N x N^(m-1) unfolding in lexicographic column order.

    Only allowed for ``N^m <= 10^6``; meant for small checks.
    """
    pts = _check_points(spec, points)
    n, m = pts.shape[0], spec.order
    if n**m > DENSE_TENSOR_CAP:
        raise MemoryError("dense unfolding limited to N^m <= %d" % DENSE_TENSOR_CAP)
    cache = affinity_cache(spec, pts)
    table = _binomial_table(n, m)
    idx = np.indices((n,) * m).reshape(m, -1).T
    srt = np.sort(idx, axis=1)
    repeated = np.any(np.diff(srt, axis=1) == 0, axis=1)
    vals = np.where(repeated, 0.0, cache[_rank(np.where(repeated[:, None], 0, srt), table)])
    return vals.reshape(n, n ** (m - 1))


def perfect_weight_matrix(cluster_sizes, d):
    """Closed-form W for the perfect tensor with clusters stored in blocks."""
    sizes = [int(s) for s in cluster_sizes]
    if any(s < d + 2 for s in sizes):
        raise ValueError("every cluster needs at least d+2=%d points" % (d + 2))
    n = sum(sizes)
    w = np.zeros((n, n))
    start = 0
    for nk in sizes:
        block = np.full((nk, nk), float(perm(nk - 2, d + 1)))
        np.fill_diagonal(block, float(perm(nk - 1, d + 1)))
        w[start:start + nk, start:start + nk] = block
        start += nk
    return WeightMatrix.from_entries(w)


def deviation_norm(spec, points, labels):
    """Frobenius norm of ``A - A_perfect`` and ``N^-m * ||A - A_perfect||^2``.

    ``m`` is the tensor order, so for the linear variant the normalization
    uses ``d+1`` in place of ``d+2``.
    """
    pts = _check_points(spec, points)
    n, m = pts.shape[0], spec.order
    labels = np.asarray(labels)
    if labels.shape[0] != n:
        raise ValueError("labels length does not match the data")
    if m < 2:
        raise ValueError("tensor order must be at least 2")
    cache = affinity_cache(spec, pts)
    ideal = affinity_cache(TensorSpec("perfect", d=m - 2, labels=labels), pts)
    sq = float(np.sum((cache - ideal) ** 2)) * factorial(m)
    return np.sqrt(sq), sq / float(n) ** m


def save_weight_matrix(path, wm, spec):
    """Write W row-major as CSV with a one-line header; the last row holds
    the degrees."""
    header = "N=%d d=%d variant=%s sigma=%r" % (wm.n, spec.d, spec.variant, spec.sigma)
    data = np.vstack([wm.entries, wm.degrees[None, :]])
    np.savetxt(path, data, delimiter=",", fmt="%.17g", header=header)


def load_weight_matrix(path):
    """Inverse of :func:`save_weight_matrix`; returns ``(WeightMatrix, header dict)``."""
    with open(path) as fh:
        first = fh.readline().lstrip("#").strip()
    meta = dict(tok.split("=", 1) for tok in first.split())
    data = np.loadtxt(path, delimiter=",", ndmin=2)
    return WeightMatrix(data[:-1], data[-1]), meta
