"""Goodness-of-clustering measures and perturbation-bound bookkeeping.

Partitions are integer label arrays (0-based).  Cluster "centers" are the
means of the embedding rows over each ground-truth cluster.
"""
from dataclasses import dataclass, field
from itertools import permutations
from math import sqrt

import numpy as np

from .affinity import perm

__all__ = [
    "AssumptionViolation",
    "BoundConstants",
    "PerfectSpectrum",
    "PerturbationCheck",
    "cluster_sizes",
    "cluster_centers",
    "perfect_embedding",
    "total_variation",
    "subspace_distance",
    "principal_angles",
    "separation_factor",
    "identification_error",
    "identification_error_bounds",
    "perfect_spectrum",
    "bound_constants",
    "ball_eps2",
    "unnormalized_size_condition",
    "check_perturbation_bound",
    "verify_perturbation_bound",
    "misclassification_rate",
]

ANGLE_TOL = 1e-10
# absolute slack for roundoff when the deviation is (numerically) zero
TV_FLOOR = 1e-12


class AssumptionViolation(ValueError):
    """Cluster sizes or degrees do not meet a hypothesis of the bounds."""


def _labels(labels):
    labels = np.asarray(labels)
    if labels.ndim != 1:
        raise ValueError("labels must be one-dimensional")
    return labels


def cluster_sizes(labels):
    _, counts = np.unique(_labels(labels), return_counts=True)
    return counts


def cluster_centers(rows, labels):
    labels = _labels(labels)
    rows = np.asarray(rows, dtype=float)
    ks = np.unique(labels)
    return np.array([rows[labels == k].mean(axis=0) for k in ks])


def perfect_embedding(labels):
    """Indicator columns scaled by 1/sqrt(N_k): the embedding of the perfect tensor."""
    labels = _labels(labels)
    ks, inv = np.unique(labels, return_inverse=True)
    U = np.zeros((labels.size, ks.size))
    U[np.arange(labels.size), inv] = 1.0
    return U / np.sqrt(U.sum(axis=0))


def total_variation(U, labels):
    """Sum over clusters of squared distances of rows to their cluster mean."""
    U = np.asarray(U, dtype=float)
    labels = _labels(labels)
    tv = 0.0
    for k in np.unique(labels):
        block = U[labels == k]
        tv += float(np.sum((block - block.mean(axis=0)) ** 2))
    return tv


def _check_pair(Ua, Ub):
    Ua = np.asarray(Ua, dtype=float)
    Ub = np.asarray(Ub, dtype=float)
    if Ua.shape != Ub.shape:
        raise ValueError("shape mismatch %r vs %r" % (Ua.shape, Ub.shape))
    return Ua, Ub


def subspace_distance(Ua, Ub):
    """Frobenius distance between the orthogonal projectors onto span(Ua) and span(Ub)."""
    Ua, Ub = _check_pair(Ua, Ub)
    K = Ua.shape[1]
    val = 2 * K - 2 * np.sum((Ua.T @ Ub) ** 2)
    return float(np.sqrt(max(val, 0.0)))


def principal_angles(Ua, Ub):
    """Principal angles (ascending) between two orthonormal bases."""
    Ua, Ub = _check_pair(Ua, Ub)
    s = np.linalg.svd(Ua.T @ Ub, compute_uv=False)
    ang = np.arccos(np.clip(s, 0.0, 1.0))
    ang[ang < ANGLE_TOL] = 0.0
    ang[np.abs(ang - np.pi / 2) < ANGLE_TOL] = np.pi / 2
    return np.sort(ang)


def separation_factor(rows, labels):
    """Squared center inner products over the squared sum of center norms."""
    c = cluster_centers(rows, labels)
    g = c @ c.T
    denom = np.trace(g) ** 2
    if denom == 0:
        raise ValueError("all cluster centers are zero")
    off = np.sum(np.triu(g, 1) ** 2)
    return float(off / denom)


def identification_error(rows, labels):
    """Fraction of rows at least half the center gap away from their own
    center.  Two clusters only."""
    labels = _labels(labels)
    ks = np.unique(labels)
    if ks.size != 2:
        raise ValueError("identification error is defined for K = 2 only")
    rows = np.asarray(rows, dtype=float)
    c = cluster_centers(rows, labels)
    gap = 0.5 * np.linalg.norm(c[0] - c[1])
    own = c[np.searchsorted(ks, labels)]
    far = np.linalg.norm(rows - own, axis=1) >= gap
    return float(np.mean(far))


def identification_error_bounds(tv, eps1):
    """Upper bounds on e_id in the T and U spaces as functions of TV.

    Each entry is None when TV is too large for that bound to apply.
    """
    out = {"T": None, "U": None}
    if tv < (sqrt(3) - 1) ** 2:
        out["T"] = 4 * tv / (2 - tv - 2 * sqrt(tv))
    if tv < (sqrt(2 + 4 / eps1**2) - 2 / eps1) ** 2:
        out["U"] = 4 * tv / (2 - tv - 4 / eps1 * sqrt(tv))
    return out


@dataclass
class PerfectSpectrum:
    eigenvalues: np.ndarray
    eigengap: float
    mode: str
    multiplicities: list = field(default_factory=list)

    @property
    def trace(self):
        return float(np.sum(self.eigenvalues))


def perfect_spectrum(cluster_sizes, d, mode="normalized"):
    """Closed-form spectrum of the perfect Z (normalized) or W (unnormalized).

    Unnormalized blocks ``(a-b) I + b 11'`` have the degree once and
    ``(d+1) perm(N_k-2, d)`` with multiplicity ``N_k - 1``.
    """
    sizes = [int(s) for s in cluster_sizes]
    K = len(sizes)
    if mode == "normalized":
        if any(s <= d + 2 for s in sizes):
            raise ValueError("normalized perfect spectrum needs every N_k > d+2")
        tops = [1.0] * K
        rest = [(d + 1) / ((s - 1) * (s - d - 1)) for s in sizes]
    elif mode == "unnormalized":
        if any(s < d + 2 for s in sizes):
            raise ValueError("unnormalized perfect spectrum needs every N_k >= d+2")
        tops = [float((s - d - 1) * perm(s - 1, d + 1)) for s in sizes]
        rest = [float((d + 1) * perm(s - 2, d)) for s in sizes]
    else:
        raise ValueError("mode must be 'normalized' or 'unnormalized'")
    mult = [(t, 1) for t in tops] + [(r, s - 1) for r, s in zip(rest, sizes)]
    vals = np.sort(np.concatenate([np.full(c, v) for v, c in mult]))[::-1]
    if mode == "normalized":
        gap = 1.0 - max(rest)
    else:
        gap = min(tops) - max(rest)
    return PerfectSpectrum(vals, float(gap), mode, mult)


@dataclass
class BoundConstants:
    epsilon1: float
    epsilon2: float
    C0: float
    C1: float
    C2: float
    delta_K_tilde: float
    alpha: float | None = None

    @property
    def threshold(self):
        """Largest normalized deviation for which the normalized bound applies."""
        return 1.0 / (8.0 * self.C1)


def _epsilon1(K, d, sizes):
    n = sum(sizes)
    if min(sizes) < 2 * d + 3:
        raise AssumptionViolation(
            "smallest cluster has %d points; need at least 2d+3=%d" % (min(sizes), 2 * d + 3)
        )
    return min(1.0, K * min(sizes) / n)


def bound_constants(K, d, cluster_sizes, degrees, perfect_degrees, alpha=None):
    """epsilon_1, epsilon_2 and the constants of the perturbation bounds."""
    sizes = [int(s) for s in cluster_sizes]
    if len(sizes) != K:
        raise ValueError("expected %d cluster sizes" % K)
    eps1 = _epsilon1(K, d, sizes)
    degrees = np.asarray(degrees, dtype=float)
    perfect_degrees = np.asarray(perfect_degrees, dtype=float)
    if np.any(degrees <= 0) or np.any(perfect_degrees <= 0):
        raise AssumptionViolation("degrees must be strictly positive")
    eps2 = float(np.min(degrees / perfect_degrees))
    r = 2 * K / eps1
    C0 = 16 / eps2 * r ** (2 * d + 5) + 8 * sqrt(2 * K) / sqrt(eps2) * r ** (d + 2.5)
    C1 = 32 / 9 * C0**2
    C2 = 32 * r ** (2 * (d + 2))
    gap = 1 - (d + 1) / ((min(sizes) - 1) * (min(sizes) - d - 1))
    return BoundConstants(eps1, eps2, C0, C1, C2, gap, alpha)


def ball_eps2(d, diameter, sigma):
    """Degree ratio guaranteed for polar affinities on data inside a ball."""
    return float(np.exp(-2 * sqrt(d + 2) * diameter / sigma))


def unnormalized_size_condition(N, K, d, eps1):
    """Whether N is large enough for the unnormalized perturbation bound."""
    need = sqrt(2 * (d + 1) * (1 - (K - 1) / K * eps1) ** d * (2 * K / eps1) ** (d + 2))
    return N >= need


@dataclass
class PerturbationCheck:
    tv: float
    deviation: float
    constant: float
    threshold: float
    hypothesis_met: bool
    holds: bool | None
    mode: str
    debug: dict = field(default_factory=dict)

    def as_dict(self):
        return {
            "tv": self.tv,
            "deviation": self.deviation,
            "constant": self.constant,
            "threshold": self.threshold,
            "hypothesis_met": self.hypothesis_met,
            "holds": self.holds,
            "mode": self.mode,
            "debug": self.debug,
        }


def check_perturbation_bound(U, labels, deviation, constants, mode="normalized", Z=None, Z_perfect=None):
    """Compare TV(U) against ``C * deviation`` when ``deviation <= 1/(8C)``.

    ``deviation`` is ``N^-(d+2) ||A - A_perfect||_F^2``.  ``C`` is C1
    (normalized) or C2 (unnormalized; the caller is responsible for the
    sample-size condition).  ``holds`` is None when the hypothesis fails.
    """
    labels = _labels(labels)
    tv = total_variation(U, labels)
    C = constants.C1 if mode == "normalized" else constants.C2
    thr = 1.0 / (8.0 * C)
    met = deviation <= thr
    holds = bool(tv <= C * deviation + TV_FLOOR) if met else None
    debug = {}
    if Z is not None and Z_perfect is not None:
        B = np.asarray(Z) - np.asarray(Z_perfect)
        debug["B_frobenius"] = float(np.linalg.norm(B))
        debug["B_over_gap"] = float(np.linalg.norm(B) / constants.delta_K_tilde)
    debug["projector_distance_sq"] = subspace_distance(U, perfect_embedding(labels)) ** 2
    return PerturbationCheck(tv, float(deviation), C, thr, bool(met), holds, mode, debug)


def verify_perturbation_bound(runs):
    """Run :func:`check_perturbation_bound` over a list of keyword dicts.

    Each dict needs ``U``, ``labels``, ``deviation``, ``constants`` and may
    carry ``mode``, ``Z`` and ``Z_perfect``.  Returns the list of checks.
    """
    return [check_perturbation_bound(**run) for run in runs]


def misclassification_rate(predicted, truth):
    """Smallest error rate over all relabelings of ``predicted``."""
    predicted = _labels(predicted)
    truth = _labels(truth)
    if predicted.shape != truth.shape:
        raise ValueError("label arrays differ in length")
    pk = np.unique(predicted)
    tk = np.unique(truth)
    K = max(pk.size, tk.size)
    if K > 8:
        raise ValueError("exhaustive alignment is limited to K <= 8")
    p_idx = np.searchsorted(pk, predicted)
    t_idx = np.searchsorted(tk, truth)
    conf = np.zeros((K, K), dtype=int)
    np.add.at(conf, (p_idx, t_idx), 1)
    best = max(sum(conf[i, p[i]] for i in range(K)) for p in permutations(range(K)))
    return 1.0 - best / truth.size
