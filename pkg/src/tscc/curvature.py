"""Geometric kernels on small point tuples.

Every scalar routine takes an ``(m, D)`` array of points.  The ``*_batch``
variants take a stack ``(B, m, D)`` and are what the affinity and Monte Carlo
code call in their inner loops; they skip the distinctness check, so a
repeated point yields ``nan``.
"""
from math import factorial

import numpy as np

__all__ = [
    "DegenerateTupleError",
    "CURVATURE_KINDS",
    "simplex_volume",
    "polar_sine",
    "polar_curvature",
    "polar_curvature_linear",
    "alt_curvature",
    "gram_root_batch",
    "polar_sines_batch",
    "polar_curvature_batch",
    "polar_curvature_linear_batch",
]

CURVATURE_KINDS = ("polar", "dls", "h")

# relative tolerance for calling two points "the same"
DISTINCT_RTOL = 1e-12


class DegenerateTupleError(ValueError):
    """Raised when a tuple contains repeated points (or the origin, for the
    linear variant)."""


def _as_tuple(points, min_points=1):
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2:
        raise ValueError("expected an (m, D) array of points, got shape %r" % (pts.shape,))
    if pts.shape[0] < min_points:
        raise ValueError("need at least %d points, got %d" % (min_points, pts.shape[0]))
    return pts


def _pairwise_distances(pts):
    diff = pts[..., :, None, :] - pts[..., None, :, :]
    return np.sqrt(np.einsum("...ijk,...ijk->...ij", diff, diff))


def _check_distinct(pts):
    dist = _pairwise_distances(pts)
    m = pts.shape[0]
    tol = DISTINCT_RTOL * (1.0 + np.abs(pts).max())
    off = dist[~np.eye(m, dtype=bool)]
    if off.size and off.min() < tol:
        raise DegenerateTupleError("degenerate tuple: repeated point")
    return dist


def gram_root_batch(tuples):
    """sqrt(det G) for the Gram matrix G of edge vectors from the first vertex.

    Equals ``(m-1)! * V_{m-1}``.  The determinant is taken as the squared
    product of the R-diagonal of a QR factorization of the edge matrix, which
    is the same quantity as det(E E') but keeps full relative accuracy for
    nearly flat simplices.
    """
    tuples = np.asarray(tuples, dtype=float)
    m, D = tuples.shape[-2:]
    if m < 2:
        return np.ones(tuples.shape[:-2])
    if m - 1 > D:
        return np.zeros(tuples.shape[:-2])
    edges = tuples[..., 1:, :] - tuples[..., :1, :]
    r = np.linalg.qr(np.swapaxes(edges, -1, -2), mode="r")
    return np.abs(np.prod(np.diagonal(r, axis1=-2, axis2=-1), axis=-1))


def simplex_volume(points):
    """(m-1)-volume of the simplex spanned by ``m`` points in R^D."""
    pts = _as_tuple(points, min_points=2)
    m = pts.shape[0]
    return float(gram_root_batch(pts) / factorial(m - 1))


def polar_sines_batch(tuples, dist=None):
    """Polar sines at every vertex, shape ``(B, m)``."""
    tuples = np.asarray(tuples, dtype=float)
    m = tuples.shape[-2]
    if dist is None:
        dist = _pairwise_distances(tuples)
    dist = np.where(np.eye(m, dtype=bool), 1.0, dist)
    with np.errstate(divide="ignore", invalid="ignore"):
        ps = gram_root_batch(tuples)[..., None] / np.prod(dist, axis=-1)
    # Hadamard's inequality bounds these by one; clip roundoff only
    return np.minimum(ps, 1.0)


def polar_curvature_batch(tuples):
    """Polar curvature ``diam * sqrt(sum psin^2)`` of each tuple in a stack."""
    tuples = np.asarray(tuples, dtype=float)
    dist = _pairwise_distances(tuples)
    diam = dist.max(axis=(-1, -2))
    ps = polar_sines_batch(tuples, dist)
    return diam * np.sqrt(np.sum(ps * ps, axis=-1))


def polar_curvature_linear_batch(tuples):
    """Polar curvature of each tuple with the origin prepended."""
    tuples = np.asarray(tuples, dtype=float)
    origin = np.zeros(tuples.shape[:-2] + (1, tuples.shape[-1]))
    return polar_curvature_batch(np.concatenate([origin, tuples], axis=-2))


def polar_sine(points, vertex):
    """Polar sine of the simplex at ``points[vertex]`` (0-based vertex)."""
    pts = _as_tuple(points, min_points=2)
    m = pts.shape[0]
    if not 0 <= vertex < m:
        raise IndexError("vertex %d out of range for %d points" % (vertex, m))
    dist = _check_distinct(pts)
    return float(polar_sines_batch(pts, dist)[vertex])


def polar_curvature(points):
    """Polar curvature of ``d+2`` distinct points.

    Symmetric in its arguments, zero exactly when the points lie on a common
    d-flat.  For ``d = 0`` this is ``sqrt(2)`` times the distance.
    """
    pts = _as_tuple(points, min_points=2)
    _check_distinct(pts)
    return float(polar_curvature_batch(pts))


def polar_curvature_linear(points):
    """Polar curvature of ``(0, z_1, ..., z_{d+1})``."""
    pts = _as_tuple(points, min_points=1)
    tol = DISTINCT_RTOL * (1.0 + np.abs(pts).max())
    if np.linalg.norm(pts, axis=1).min() < tol:
        raise DegenerateTupleError("degenerate tuple: point at the origin")
    return polar_curvature(np.vstack([np.zeros(pts.shape[1]), pts]))


def _dist_to_affine_hull(x, others):
    base = others[0]
    edges = (others[1:] - base).T
    r = x - base
    if edges.shape[1]:
        coef, *_ = np.linalg.lstsq(edges, r, rcond=None)
        r = r - edges @ coef
    return float(np.linalg.norm(r))


def alt_curvature(points, kind="dls"):
    """Alternative least-squares curvatures of ``d+2`` points.

    ``dls``: root of the least sum of squared distances to a d-flat.
    ``h``: smallest distance from a vertex to the affine hull of the others.
    ``polar``: same as :func:`polar_curvature`.
    """
    if kind not in CURVATURE_KINDS:
        raise ValueError("unknown curvature kind %r" % (kind,))
    pts = _as_tuple(points, min_points=2)
    _check_distinct(pts)
    if kind == "polar":
        return float(polar_curvature_batch(pts))
    m = pts.shape[0]
    d = m - 2
    if kind == "dls":
        s = np.linalg.svd(pts - pts.mean(axis=0), compute_uv=False)
        return float(np.sqrt(np.sum(s[d:] ** 2)))
    return min(_dist_to_affine_hull(pts[i], np.delete(pts, i, axis=0)) for i in range(m))
