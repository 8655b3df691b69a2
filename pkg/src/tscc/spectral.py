"""Normalization, eigen-embedding, K-means and the full TSCC pipelines."""
from dataclasses import dataclass

import numpy as np

from .affinity import TensorSpec, WeightMatrix, weight_matrix

__all__ = [
    "IsolatedPointError",
    "EmptyClusterError",
    "Embedding",
    "ClusteringResult",
    "TSCCResult",
    "normalize_symmetric",
    "spectral_embedding",
    "row_normalize",
    "kmeans_cluster",
    "run_tscc",
]

EIGENGAP_TOL = 1e-8


class IsolatedPointError(ValueError):
    """A row of W sums to zero, so D^{-1/2} is undefined."""


class EmptyClusterError(RuntimeError):
    pass


@dataclass
class Embedding:
    U: np.ndarray
    eigenvalues: np.ndarray
    mode: str = "normalized"
    eigengap_collapse: bool = False

    @property
    def eigengap(self):
        k = self.U.shape[1]
        if k >= self.eigenvalues.size:
            return np.nan
        return float(self.eigenvalues[k - 1] - self.eigenvalues[k])


@dataclass
class ClusteringResult:
    labels: np.ndarray
    centers: np.ndarray
    inertia: float
    restarts_used: int


@dataclass
class TSCCResult:
    clustering: ClusteringResult
    embedding: Embedding
    weights: WeightMatrix
    Z: np.ndarray
    rows: np.ndarray

    @property
    def labels(self):
        return self.clustering.labels


def normalize_symmetric(W):
    """``D^{-1/2} W D^{-1/2}`` with D the row sums of W."""
    if isinstance(W, WeightMatrix):
        entries, degrees = W.entries, W.degrees
    else:
        entries = np.asarray(W, dtype=float)
        degrees = entries.sum(axis=1)
    bad = np.flatnonzero(degrees <= 0)
    if bad.size:
        raise IsolatedPointError("isolated point(s) with zero degree: %s" % bad.tolist())
    s = 1.0 / np.sqrt(degrees)
    Z = entries * s[:, None] * s[None, :]
    return 0.5 * (Z + Z.T)


def _fix_signs(vecs):
    # largest-magnitude entry of each column made positive, for reproducibility
    idx = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[idx, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return vecs * signs


def spectral_embedding(Z, K, mode="normalized"):
    """Top-K eigenvectors of the symmetric matrix Z.

    Eigenvalues are returned in descending order (ties keep index order).
    ``eigengap_collapse`` is set when eigenvalues K and K+1 agree to 1e-8.
    """
    Z = np.asarray(Z, dtype=float)
    n = Z.shape[0]
    if Z.shape != (n, n):
        raise ValueError("Z must be square")
    if not 1 <= K <= n:
        raise ValueError("need 1 <= K <= N, got K=%d, N=%d" % (K, n))
    try:
        w, v = np.linalg.eigh(Z)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("eigensolver failed: %s" % exc) from exc
    order = np.argsort(-w, kind="stable")
    w, v = w[order], v[:, order]
    collapse = K < n and abs(w[K - 1] - w[K]) < EIGENGAP_TOL * max(1.0, abs(w[0]))
    return Embedding(_fix_signs(v[:, :K]), w, mode, bool(collapse))


def row_normalize(U, mode="V", labels=None):
    """T rows: ``sqrt(N_k) u_i`` using cluster sizes from ``labels``.
    V rows: ``u_i / |u_i|``."""
    U = np.asarray(U, dtype=float)
    if mode == "T":
        if labels is None:
            raise ValueError("T normalization needs cluster labels")
        labels = np.asarray(labels)
        _, inv, counts = np.unique(labels, return_inverse=True, return_counts=True)
        return U * np.sqrt(counts[inv])[:, None]
    if mode == "V":
        norms = np.linalg.norm(U, axis=1)
        zero = np.flatnonzero(norms == 0)
        if zero.size:
            raise ValueError("cannot V-normalize zero rows: %s" % zero.tolist())
        return U / norms[:, None]
    raise ValueError("unknown row normalization %r" % (mode,))


def _canonical_labels(labels, centers):
    # relabel clusters by order of first appearance
    _, first = np.unique(labels, return_index=True)
    old = labels[np.sort(first)]
    remap = np.empty(centers.shape[0], dtype=int)
    remap[old] = np.arange(old.size)
    return remap[labels], centers[old]


def _plus_plus_init(X, K, rng):
    n = X.shape[0]
    centers = [X[rng.integers(n)]]
    d2 = np.sum((X - centers[0]) ** 2, axis=1)
    for _ in range(1, K):
        total = d2.sum()
        if total > 0:
            i = rng.choice(n, p=d2 / total)
        else:
            i = rng.integers(n)
        centers.append(X[i])
        d2 = np.minimum(d2, np.sum((X - X[i]) ** 2, axis=1))
    return np.array(centers)


def _lloyd(X, centers, max_iter, tol):
    K = centers.shape[0]
    for _ in range(max_iter):
        dist = np.sum((X[:, None, :] - centers[None, :, :]) ** 2, axis=2)
        labels = np.argmin(dist, axis=1)
        counts = np.bincount(labels, minlength=K)
        if np.any(counts == 0):
            return None
        new = np.array([X[labels == k].mean(axis=0) for k in range(K)])
        shift = np.max(np.linalg.norm(new - centers, axis=1))
        centers = new
        if shift < tol:
            break
    dist = np.sum((X[:, None, :] - centers[None, :, :]) ** 2, axis=2)
    labels = np.argmin(dist, axis=1)
    if np.any(np.bincount(labels, minlength=K) == 0):
        return None
    centers = np.array([X[labels == k].mean(axis=0) for k in range(K)])
    inertia = float(np.sum((X - centers[labels]) ** 2))
    return labels, centers, inertia


def kmeans_cluster(rows, K, restarts=20, seed=0, max_iter=300, tol=1e-9, max_retries=10):
    """Best-inertia Lloyd K-means over ``restarts`` k-means++ initializations.

    Labels are 0-based and numbered by first appearance.  A restart that ends
    with an empty cluster is re-seeded up to ``max_retries`` times.
    """
    X = np.asarray(rows, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n = X.shape[0]
    if not 1 <= K <= n:
        raise ValueError("need 1 <= K <= N")
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(restarts):
        for _attempt in range(max_retries + 1):
            out = _lloyd(X, _plus_plus_init(X, K, rng), max_iter, tol)
            if out is not None:
                break
        else:
            raise EmptyClusterError("K-means kept producing empty clusters")
        if best is None or out[2] < best[2] - 1e-12 * max(1.0, best[2]):
            best = out
    labels, centers = _canonical_labels(*best[:2])
    return ClusteringResult(labels, centers, best[2], restarts)


def run_tscc(points, d, K, sigma, variant="polar_affine", q=1.0, row_norm=None,
             unnormalized=False, restarts=20, seed=0, labels=None, workers=1):
    """Run TSCC (or TLSCC / TSCC-UN) end to end.

    ``variant`` picks the affinity tensor ("polar_affine", "polar_linear" for
    TLSCC, "polar_power" with exponent ``q``).  ``unnormalized=True`` skips the
    degree normalization (TSCC-UN).  ``row_norm`` is None, "T" or "V"; T uses
    cluster sizes from ``labels`` when given, otherwise from a first K-means
    pass on the raw rows.
    """
    spec = TensorSpec(variant, sigma=sigma, d=d, q=q)
    W = weight_matrix(spec, points, workers=workers)
    if unnormalized:
        Z = W.entries
        mode = "unnormalized"
    else:
        Z = normalize_symmetric(W)
        mode = "normalized"
    emb = spectral_embedding(Z, K, mode)
    rows = emb.U
    if row_norm == "T":
        sizes_from = labels
        if sizes_from is None:
            sizes_from = kmeans_cluster(rows, K, restarts, seed).labels
        rows = row_normalize(rows, "T", sizes_from)
    elif row_norm is not None:
        rows = row_normalize(rows, row_norm)
    result = kmeans_cluster(rows, K, restarts, seed)
    return TSCCResult(result, emb, W, Z, rows)
