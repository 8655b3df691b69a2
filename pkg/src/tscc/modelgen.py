"""Synthetic hybrid linear models, named example measures, flat fitting, I/O."""
import csv
from dataclasses import dataclass, field

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

__all__ = [
    "Flat",
    "MixtureModel",
    "Dataset",
    "SAMPLERS",
    "sample_mixture",
    "random_lines_model",
    "builtin_sampler",
    "fit_lsq_flat",
    "write_dataset_csv",
    "read_dataset_csv",
    "load_model_config",
]


@dataclass
class Flat:
    """Affine d-flat ``base + span(frame)``; ``frame`` rows are orthonormal."""

    base: np.ndarray
    frame: np.ndarray

    def __post_init__(self):
        self.base = np.asarray(self.base, dtype=float)
        frame = np.asarray(self.frame, dtype=float).reshape(-1, self.base.size)
        if frame.shape[0]:
            gram = frame @ frame.T
            if not np.allclose(gram, np.eye(frame.shape[0]), atol=1e-10):
                q, _ = np.linalg.qr(frame.T)
                frame = q.T
        if frame.shape[0] >= self.base.size:
            raise ValueError("flat dimension must be below the ambient dimension")
        self.frame = frame

    @property
    def d(self):
        return self.frame.shape[0]

    @property
    def D(self):
        return self.base.size

    def coordinates(self, points):
        return (np.atleast_2d(points) - self.base) @ self.frame.T

    def distance(self, points):
        r = np.atleast_2d(points) - self.base
        r = r - (r @ self.frame.T) @ self.frame
        return np.linalg.norm(r, axis=1)


@dataclass
class MixtureModel:
    """K flats with ``sizes[k]`` points each, uniform over the box
    ``[-extent, extent]^d`` in flat coordinates, plus Gaussian noise in the
    orthogonal complement with standard deviation ``noise * diameter`` of
    that box."""

    flats: list
    sizes: list
    extent: object = 1.0
    noise: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if len(self.flats) != len(self.sizes):
            raise ValueError("need one size per flat")
        if len({f.D for f in self.flats}) != 1 or len({f.d for f in self.flats}) != 1:
            raise ValueError("all flats must share d and D")
        d = self.flats[0].d
        if any(s < d + 2 for s in self.sizes):
            raise ValueError("every cluster needs at least d+2 points")
        if self.noise < 0:
            raise ValueError("noise must be nonnegative")
        ext = np.broadcast_to(np.asarray(self.extent, dtype=float), (len(self.flats),))
        if np.any(ext <= 0):
            raise ValueError("extent must be positive")
        self.extent = ext.copy()


@dataclass
class Dataset:
    points: np.ndarray
    labels: np.ndarray | None = None
    provenance: dict = field(default_factory=dict)

    @property
    def sizes(self):
        if self.labels is None:
            return None
        return np.bincount(self.labels)


def sample_mixture(model):
    """Draw a Dataset from ``model``; clusters come out in blocks ordered by
    nondecreasing size (ties keep model order)."""
    rng = np.random.default_rng(model.seed)
    order = np.argsort(model.sizes, kind="stable")
    pts, labels = [], []
    for new_label, k in enumerate(order):
        flat, n, h = model.flats[k], int(model.sizes[k]), model.extent[k]
        coords = rng.uniform(-h, h, size=(n, flat.d))
        x = flat.base + coords @ flat.frame
        if model.noise > 0:
            scale = model.noise * 2 * h * np.sqrt(max(flat.d, 1))
            g = rng.normal(scale=scale, size=(n, flat.D))
            g = g - (g @ flat.frame.T) @ flat.frame
            x = x + g
        pts.append(x)
        labels.append(np.full(n, new_label))
    prov = {"model": "mixture", "seed": model.seed, "noise": model.noise,
            "sizes": [int(model.sizes[k]) for k in order]}
    return Dataset(np.vstack(pts), np.concatenate(labels), prov)


def _clip_line_to_unit_square(point, direction):
    # parameter range where point + t * direction stays in [0, 1]^2
    lo, hi = -np.inf, np.inf
    for p, u in zip(point, direction):
        if abs(u) < 1e-15:
            continue
        a, b = (0 - p) / u, (1 - p) / u
        lo, hi = max(lo, min(a, b)), min(hi, max(a, b))
    return lo, hi


def random_lines_model(K=3, n_per_line=25, noise=0.0, seed=0):
    """K random lines in the unit square.

    Each line passes through a uniform point of the square at a uniform angle
    and is clipped to the square; points are uniform on the clipped chord.
    """
    rng = np.random.default_rng(seed)
    flats, extents = [], []
    for _ in range(K):
        p = rng.uniform(0, 1, size=2)
        phi = rng.uniform(0, np.pi)
        u = np.array([np.cos(phi), np.sin(phi)])
        lo, hi = _clip_line_to_unit_square(p, u)
        flats.append(Flat(p + 0.5 * (lo + hi) * u, u[None, :]))
        extents.append(0.5 * (hi - lo))
    return MixtureModel(flats, [n_per_line] * K, extents, noise, seed)


# named measures from the incidence examples
def _segment(L=1.0, theta=0.0):
    u = np.array([np.cos(theta), np.sin(theta)])

    def draw(rng, n):
        return rng.uniform(0, L, size=(n, 1)) * u

    return draw


def _rectangle_strip(L=1.0, eps=0.1, orientation="horizontal"):
    def draw(rng, n):
        a = rng.uniform(eps, L + eps, size=n)
        b = rng.uniform(0, eps, size=n)
        if orientation == "horizontal":
            return np.column_stack([a, b])
        return np.column_stack([b, a])

    if orientation not in ("horizontal", "vertical"):
        raise ValueError("orientation must be 'horizontal' or 'vertical'")
    return draw


def _half_disk_3d(orientation="D1"):
    if orientation not in ("D1", "D2"):
        raise ValueError("orientation must be 'D1' or 'D2'")

    def draw(rng, n):
        rho = np.sqrt(rng.uniform(0, 1, size=n))
        if orientation == "D1":
            phi = rng.uniform(0, np.pi, size=n)
            return np.column_stack([np.zeros(n), rho * np.cos(phi), rho * np.sin(phi)])
        theta = rng.uniform(-np.pi / 2, np.pi / 2, size=n)
        return np.column_stack([rho * np.cos(theta), rho * np.sin(theta), np.zeros(n)])

    return draw


SAMPLERS = {
    "segment": _segment,
    "angled_line": _segment,
    "rectangle_strip": _rectangle_strip,
    "half_disk_3d": _half_disk_3d,
}


def builtin_sampler(name, **params):
    """Return ``draw(rng, n) -> (n, D)`` for a named measure.

    segment(L, theta=0)          arclength-uniform on r*(cos theta, sin theta), 0<=r<=L
    angled_line(L, theta)        same measure, named after the TLSCC example
    rectangle_strip(L, eps, orientation)
                                 uniform on R1 ([eps, L+eps] x [0, eps]) or its
                                 mirror R2 ("vertical")
    half_disk_3d(orientation)    area-uniform on D1 (x=0, upper half) or D2
                                 (z=0, x>=0)
    """
    try:
        factory = SAMPLERS[name]
    except KeyError:
        raise ValueError("unknown sampler %r" % (name,)) from None
    if name == "angled_line":
        params.setdefault("theta", np.pi / 2)
    return factory(**params)


def fit_lsq_flat(points, d):
    """Total-least-squares d-flat through ``points``.

    Returns ``(flat, e2)`` with ``e2`` the root mean squared orthogonal
    distance, i.e. the least squares error of the empirical measure.
    """
    X = np.atleast_2d(np.asarray(points, dtype=float))
    n, D = X.shape
    if n < d + 1:
        raise ValueError("need at least d+1 points to fit a d-flat")
    if not 0 <= d < D:
        raise ValueError("need 0 <= d < D")
    c = X.mean(axis=0)
    _, s, vt = np.linalg.svd(X - c, full_matrices=True)
    resid = np.sum(s[d:] ** 2)
    return Flat(c, vt[:d]), float(np.sqrt(resid / n))


def write_dataset_csv(path, dataset):
    pts = np.asarray(dataset.points)
    D = pts.shape[1]
    header = ["x%d" % (j + 1) for j in range(D)]
    if dataset.labels is not None:
        header.append("label")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i, row in enumerate(pts):
            out = [repr(float(v)) for v in row]
            if dataset.labels is not None:
                out.append(str(int(dataset.labels[i])))
            w.writerow(out)


def read_dataset_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError("empty dataset file")
    header = [h.strip() for h in rows[0]]
    has_label = header[-1] == "label"
    coords = header[:-1] if has_label else header
    if not coords or any(h != "x%d" % (j + 1) for j, h in enumerate(coords)):
        raise ValueError("bad header %r" % (rows[0],))
    body = [r for r in rows[1:] if r]
    data = np.array([[float(v) for v in r[:len(coords)]] for r in body]).reshape(-1, len(coords))
    labels = np.array([int(r[-1]) for r in body]) if has_label else None
    return Dataset(data, labels, {"source": str(path)})


def load_model_config(path):
    """Read a TOML model description.

    Either ``model = "three_lines"`` (with optional ``K``, ``n_per_line``)
    or explicit ``[[flat]]`` tables with ``base``, ``frame``, ``size`` and
    optional ``extent``.  Top-level ``seed`` and ``noise`` apply to both.
    """
    with open(path, "rb") as fh:
        cfg = tomllib.load(fh)
    seed = int(cfg.get("seed", 0))
    noise = float(cfg.get("noise", 0.0))
    if cfg.get("model") in ("three_lines", "random_lines"):
        return random_lines_model(int(cfg.get("K", 3)), int(cfg.get("n_per_line", 25)), noise, seed)
    flats = cfg.get("flat")
    if not flats:
        raise ValueError("config needs `model` or at least one [[flat]] table")
    return MixtureModel(
        [Flat(f["base"], f["frame"]) for f in flats],
        [int(f["size"]) for f in flats],
        [float(f.get("extent", 1.0)) for f in flats],
        noise,
        seed,
    )
