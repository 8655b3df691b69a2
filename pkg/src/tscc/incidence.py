"""Monte Carlo curvature moments, incidence constants and alpha.

Samplers are callables ``draw(rng, n) -> (n, D)`` (see
:func:`tscc.modelgen.builtin_sampler`).  Draws are split into fixed-size
chunks, each with its own child seed, so results depend only on ``seed``
and ``M``.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from itertools import combinations_with_replacement
from math import sqrt

import numpy as np

from .curvature import polar_curvature_batch, polar_curvature_linear_batch

__all__ = [
    "MOMENT_KINDS",
    "EXAMPLES",
    "MomentEstimate",
    "AlphaDecomposition",
    "mc_curvature_moment",
    "mc_incidence_constant",
    "alpha_constant",
    "analytic_bound",
]

MOMENT_KINDS = ("cp", "cp_linear", "cp_power", "hat")
EXAMPLES = ("orthogonal_lines_tscc", "angled_lines_tlscc", "rectangles_tlscc", "half_disks_tlscc")

CHUNK = 8192
DEFAULT_PIVOTS = 1000
PIVOT_INNER = 256


@dataclass
class MomentEstimate:
    value: float
    std_error: float
    samples: int
    kind: str
    params: dict = field(default_factory=dict)

    def as_record(self, bound=None):
        rec = asdict(self)
        if bound is not None:
            rec["bound"] = bound
        return rec


@dataclass
class AlphaDecomposition:
    within_term: float
    incidence_term: float
    sigma: float
    within_std_error: float = 0.0
    incidence_std_error: float = 0.0

    @property
    def alpha(self):
        return self.within_term + self.incidence_term

    @property
    def std_error(self):
        return sqrt(self.within_std_error**2 + self.incidence_std_error**2)

    def tail_probability(self, N, d):
        """``exp(-2 N alpha^2 / (d+2)^2)``, reported next to alpha only."""
        return float(np.exp(-2 * N * self.alpha**2 / (d + 2) ** 2))


def _chunk_sizes(M):
    full, rem = divmod(M, CHUNK)
    return [CHUNK] * full + ([rem] if rem else [])


def _run_chunks(fn, M, seed, workers):
    sizes = _chunk_sizes(M)
    seeds = np.random.SeedSequence(seed).spawn(len(sizes))
    jobs = list(zip(sizes, seeds))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda job: fn(job[0], np.random.default_rng(job[1])), jobs))
    else:
        parts = [fn(n, np.random.default_rng(s)) for n, s in jobs]
    return np.concatenate(parts)


def _tuples(samplers, n, rng):
    """Stack of n tuples; column j drawn from samplers[j]."""
    return np.stack([draw(rng, n) for draw in samplers], axis=1)


def _curv(tuples, linear):
    return polar_curvature_linear_batch(tuples) if linear else polar_curvature_batch(tuples)


def _mean_se(x):
    x = np.asarray(x, dtype=float)
    se = x.std(ddof=1) / sqrt(x.size) if x.size > 1 else 0.0
    return float(x.mean()), float(se)


def _root(mean, se):
    # delta method for sqrt(mean)
    if mean <= 0:
        return 0.0, 0.0
    root = sqrt(mean)
    return root, se / (2 * root)


def mc_curvature_moment(sampler, d, kind="cp", M=100_000, seed=0, q=1.0,
                        pivots=DEFAULT_PIVOTS, workers=1):
    """Monte Carlo estimate of a curvature moment of one measure.

    ``cp``         sqrt(E c_p^2) over (d+2)-tuples
    ``cp_linear``  sqrt(E c_p(0, z_1..z_{d+1})^2)
    ``cp_power``   E c_p^(2q)
    ``hat``        sqrt(max over z_1 of E[c_p^2 | z_1]); z_1 ranges over
                   ``pivots`` draws of the measure, so this is a lower bound on
                   the supremum.  The pivot is chosen with common inner draws
                   and then re-estimated with ``M`` fresh tuples.
    """
    if kind not in MOMENT_KINDS:
        raise ValueError("unknown moment kind %r" % (kind,))
    if M < 100:
        raise ValueError("need M >= 100 samples")
    if d < 0:
        raise ValueError("d must be nonnegative")
    params = {"d": d, "M": M, "seed": seed}
    if kind == "cp_power":
        if q < 1:
            raise ValueError("q must be >= 1")
        params["q"] = q

    if kind == "hat":
        return _hat_moment(sampler, d, M, seed, pivots, params)

    linear = kind == "cp_linear"
    m = d + 1 if linear else d + 2

    def chunk(n, rng):
        c = _curv(_tuples([sampler] * m, n, rng), linear)
        return c ** (2 * q) if kind == "cp_power" else c * c

    mean, se = _mean_se(_run_chunks(chunk, M, seed, workers))
    if kind == "cp_power":
        return MomentEstimate(mean, se, M, kind, params)
    return MomentEstimate(*_root(mean, se), M, kind, params)


def _hat_moment(sampler, d, M, seed, pivots, params):
    ss = np.random.SeedSequence(seed)
    s_pivot, s_select, s_final = ss.spawn(3)
    z1 = sampler(np.random.default_rng(s_pivot), pivots)
    inner = _tuples([sampler] * (d + 1), PIVOT_INNER, np.random.default_rng(s_select))
    scores = np.empty(pivots)
    for start in range(0, pivots, 64):
        block = z1[start:start + 64]
        tup = np.concatenate(
            [np.broadcast_to(block[:, None, None, :], (block.shape[0], PIVOT_INNER, 1, block.shape[1])),
             np.broadcast_to(inner[None], (block.shape[0],) + inner.shape)],
            axis=2,
        )
        c = polar_curvature_batch(tup)
        scores[start:start + 64] = np.mean(c * c, axis=1)
    best = z1[int(np.argmax(scores))]
    rng = np.random.default_rng(s_final)
    vals = []
    for n in _chunk_sizes(M):
        rest = _tuples([sampler] * (d + 1), n, rng)
        tup = np.concatenate([np.broadcast_to(best, (n, 1, best.size)), rest], axis=1)
        c = polar_curvature_batch(tup)
        vals.append(c * c)
    mean, se = _mean_se(np.concatenate(vals))
    params = dict(params, pivots=pivots, pivot=best.tolist())
    return MomentEstimate(*_root(mean, se), M, "hat", params)


def _patterns(K, m):
    return [p for p in combinations_with_replacement(range(K), m) if len(set(p)) > 1]


def mc_incidence_constant(samplers, d, sigma, linear=False, M=100_000, seed=0, workers=1):
    """Largest mixed-cluster mean of ``exp(-c_p / sigma)``.

    Index patterns are enumerated as multisets (the curvature is symmetric),
    each estimated with ``M`` tuples.  The returned params carry the
    per-pattern table and the maximizing pattern.
    """
    K = len(samplers)
    if K < 2:
        raise ValueError("incidence constant needs at least two measures")
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    m = d + 1 if linear else d + 2
    ss = np.random.SeedSequence(seed)
    table = []
    for pattern, child in zip(_patterns(K, m), ss.spawn(len(_patterns(K, m)))):
        draws = [samplers[k] for k in pattern]

        def chunk(n, rng, draws=draws):
            return np.exp(-_curv(_tuples(draws, n, rng), linear) / sigma)

        mean, se = _mean_se(_run_chunks(chunk, M, int(child.generate_state(1)[0]), workers))
        table.append({"pattern": list(pattern), "value": mean, "std_error": se})
    top = max(table, key=lambda row: row["value"])
    params = {"d": d, "sigma": sigma, "linear": linear, "M": M, "seed": seed,
              "pattern": top["pattern"], "patterns": table}
    return MomentEstimate(top["value"], top["std_error"], M, "incidence", params)


def alpha_constant(samplers, d, sigma, linear=False, M=100_000, seed=0, workers=1):
    """Within-cluster curvature term plus the incidence constant at sigma/2.

    For ``linear=True`` the linear curvature moments and incidence constant
    are used (pass the flats' dimension as ``d``).
    """
    ss = np.random.SeedSequence(seed)
    seeds = [int(s.generate_state(1)[0]) for s in ss.spawn(len(samplers) + 1)]
    kind = "cp_linear" if linear else "cp"
    within, within_var = 0.0, 0.0
    for draw, s in zip(samplers, seeds):
        est = mc_curvature_moment(draw, d, kind, M, s, workers=workers)
        within += est.value**2
        within_var += (2 * est.value * est.std_error) ** 2
    inc = mc_incidence_constant(samplers, d, sigma / 2, linear, M, seeds[-1], workers)
    return AlphaDecomposition(
        within / sigma**2, inc.value, sigma, sqrt(within_var) / sigma**2, inc.std_error
    )


def analytic_bound(example, sigma, L=1.0, theta=np.pi / 2, omega=None):
    """Closed-form upper bounds on the incidence constant of the named examples."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    if example == "orthogonal_lines_tscc":
        if not L > 0:
            raise ValueError("L must be positive")
        a = sqrt(2) * L / sigma
        return float(-np.expm1(-a) / a)
    if example == "angled_lines_tlscc":
        if not L > 0 or not 0 < theta <= np.pi / 2:
            raise ValueError("need L > 0 and 0 < theta <= pi/2")
        a = L * np.sin(theta) / sigma
        return float(2 / a**2 * (1 - np.exp(-a) * (1 + a)))
    if example == "rectangles_tlscc":
        if omega is None or not omega > 0:
            raise ValueError("need omega = L/eps > 0")
        s4 = sigma**0.25
        return float(np.sqrt(sigma) / omega**2 + 2 * s4 / omega * np.exp(-1 / (2 * sigma**0.75))
                     + np.exp(-1 / sigma**0.75))
    if example == "half_disks_tlscc":
        s4 = sigma**0.25
        return float(8 * np.sqrt(sigma) / np.pi**2 + 8 * s4 / np.pi + 4 * sigma**2 / np.sin(s4) ** 4)
    raise ValueError("unknown example %r" % (example,))
