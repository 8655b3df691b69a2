from itertools import product
from math import factorial

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tscc.affinity import (
    TensorSpec,
    WeightMatrix,
    affinity_value,
    deviation_norm,
    load_weight_matrix,
    perfect_weight_matrix,
    perm,
    save_weight_matrix,
    unfold,
    weight_matrix,
)
from tscc.curvature import polar_curvature, polar_curvature_linear
from tscc.modelgen import random_lines_model, sample_mixture


def brute_unfold(spec, pts):
    # oracle: every ordered tuple through the scalar kernels
    n, m = len(pts), spec.order
    A = np.zeros((n, n ** (m - 1)))
    for col, rest in enumerate(product(range(n), repeat=m - 1)):
        for i in range(n):
            idx = (i,) + rest
            if len(set(idx)) < m:
                continue
            if spec.variant == "perfect":
                A[i, col] = float(len({spec.labels[j] for j in idx}) == 1)
                continue
            sub = pts[list(idx)]
            c = polar_curvature_linear(sub) if spec.variant == "polar_linear" else polar_curvature(sub)
            A[i, col] = np.exp(-(c ** spec.power) / spec.sigma)
    return A


def test_perm():
    assert perm(5, 2) == 20
    assert perm(7, 0) == 1
    assert perm(4, 4) == 24
    assert perm(3, 5) == 0
    with pytest.raises(ValueError):
        perm(-1, 0)


def test_spec_validation():
    with pytest.raises(ValueError):
        TensorSpec("polar_affine", sigma=0.0)
    with pytest.raises(ValueError):
        TensorSpec("polar_power", q=0.5)
    with pytest.raises(ValueError):
        TensorSpec("perfect")
    with pytest.raises(ValueError):
        TensorSpec("nope")
    assert TensorSpec("polar_linear", d=1).order == 2
    assert TensorSpec("polar_affine", d=1).order == 3


def test_affinity_value_examples():
    pts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [2.0, 0.0]])
    spec = TensorSpec("polar_affine", sigma=2.0, d=1)
    assert affinity_value(spec, pts, (0, 0, 1)) == 0.0
    assert affinity_value(spec, pts, (0, 1, 2)) == pytest.approx(np.exp(-1), rel=1e-14)
    assert affinity_value(spec, pts, (0, 1, 3)) == pytest.approx(1.0, abs=1e-15)
    perfect = TensorSpec("perfect", d=1, labels=np.array([0, 0, 1, 0]))
    assert affinity_value(perfect, pts, (0, 1, 3)) == 1.0
    assert affinity_value(perfect, pts, (0, 1, 2)) == 0.0
    with pytest.raises(ValueError):
        affinity_value(spec, pts, (0, 1))


@pytest.mark.parametrize("variant", ["polar_affine", "polar_linear", "polar_power", "perfect"])
@pytest.mark.parametrize("d", [0, 1, 2])
def test_streaming_matches_brute_oracle(variant, d):
    rng = np.random.default_rng(10 * d + len(variant))
    n = 6 if d < 2 else 5
    pts = rng.uniform(0.1, 1.0, size=(n, d + 2))
    labels = np.arange(n) % 2
    spec = TensorSpec(variant, sigma=0.7, d=d, q=1.5, labels=labels if variant == "perfect" else None)
    A = brute_unfold(spec, pts)
    np.testing.assert_allclose(unfold(spec, pts), A, rtol=1e-12, atol=1e-15)
    W = weight_matrix(spec, pts, chunk_size=3)
    np.testing.assert_allclose(W.entries, A @ A.T, rtol=1e-10, atol=1e-14)
    np.testing.assert_array_equal(W.degrees, W.entries.sum(axis=1))


def test_perfect_closed_forms():
    W = perfect_weight_matrix([5], 1)
    assert W.entries[0, 0] == 12 and W.entries[0, 1] == 6
    assert W.degrees[0] == 36
    W = perfect_weight_matrix([5, 5], 0)
    assert W.entries[0, 0] == 4 and W.entries[0, 1] == 3 and W.entries[0, 5] == 0
    np.testing.assert_array_equal(W.degrees, 16)
    with pytest.raises(ValueError):
        perfect_weight_matrix([2], 1)


PERFECT_CASES = [
    (sizes, d)
    for sizes in [(3,), (4, 3), (3, 5, 4), (8,), (6, 7)]
    for d in range(3)
    if min(sizes) >= d + 2
]


@pytest.mark.parametrize("sizes,d", PERFECT_CASES)
def test_perfect_streaming_equals_closed_form(sizes, d):
    labels = np.repeat(np.arange(len(sizes)), sizes)
    pts = np.random.default_rng(0).standard_normal((labels.size, 2))
    W = weight_matrix(TensorSpec("perfect", d=d, labels=labels), pts)
    ref = perfect_weight_matrix(sizes, d)
    np.testing.assert_allclose(W.entries, ref.entries, rtol=1e-10, atol=0)
    nk = np.array(sizes)[labels]
    dk = [(s - d - 1) * perm(s - 1, d + 1) for s in nk]
    np.testing.assert_allclose(W.degrees, dk, rtol=1e-12)


def test_collinear_four_points():
    pts = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [5.0, 5.0]])
    W = weight_matrix(TensorSpec("polar_affine", sigma=0.3, d=1), pts)
    np.testing.assert_allclose(np.diag(W.entries), 6, rtol=1e-14)
    off = W.entries[~np.eye(4, dtype=bool)]
    np.testing.assert_allclose(off, 2, rtol=1e-14)


def test_two_points_d0():
    # single column per row; W_12 vanishes since A(i, i) = 0
    t, sigma = 0.7, 0.5
    W = weight_matrix(TensorSpec("polar_affine", sigma=sigma, d=0), np.array([[0.0], [t]]))
    expect = np.exp(-2 * np.sqrt(2) * t / sigma)
    assert W.entries[0, 0] == pytest.approx(expect, rel=1e-14)
    assert W.entries[1, 1] == pytest.approx(expect, rel=1e-14)
    assert W.entries[0, 1] == 0.0


def test_repeated_points_and_small_n():
    spec = TensorSpec("polar_affine", sigma=1.0, d=1)
    with pytest.raises(ValueError, match="repeated"):
        weight_matrix(spec, np.array([[0.0, 0], [1, 1], [1, 1], [2, 0]]))
    with pytest.raises(ValueError, match="at least"):
        weight_matrix(spec, np.array([[0.0, 0], [1, 1]]))
    with pytest.raises(ValueError, match="origin"):
        weight_matrix(TensorSpec("polar_linear", sigma=1.0, d=1), np.array([[0.0, 0], [1, 1], [2, 3]]))


def test_memory_cap():
    pts = np.random.default_rng(0).standard_normal((40, 3))
    with pytest.raises(MemoryError):
        weight_matrix(TensorSpec("polar_affine", sigma=1.0, d=1), pts, max_bytes=1000)


def test_workers_do_not_change_result(rng):
    pts = rng.standard_normal((20, 3))
    spec = TensorSpec("polar_affine", sigma=0.5, d=1)
    a = weight_matrix(spec, pts, chunk_size=17, workers=1)
    b = weight_matrix(spec, pts, chunk_size=17, workers=3)
    np.testing.assert_array_equal(a.entries, b.entries)


def test_clean_data_small_sigma_approaches_perfect():
    ds = sample_mixture(random_lines_model(3, 10, 0.0, seed=3))
    W = weight_matrix(TensorSpec("polar_affine", sigma=1e-5, d=1), ds.points)
    ref = perfect_weight_matrix(ds.sizes, 1)
    assert np.max(np.abs(W.entries - ref.entries)) / ref.entries.max() < 1e-3


def _random_cloud(seed, n, D):
    return np.random.default_rng(seed).uniform(-1, 1, size=(n, D))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31), st.integers(4, 9), st.integers(0, 2), st.floats(0.05, 5.0))
def test_psd_symmetric_and_monotone_in_sigma(seed, n, d, sigma):
    pts = _random_cloud(seed, n, d + 2)
    lo = weight_matrix(TensorSpec("polar_affine", sigma=sigma, d=d), pts)
    hi = weight_matrix(TensorSpec("polar_affine", sigma=2 * sigma, d=d), pts)
    assert np.array_equal(lo.entries, lo.entries.T)
    ev = np.linalg.eigvalsh(lo.entries)
    assert ev.min() >= -1e-8 * max(ev.max(), 1e-300)
    assert np.all(hi.entries >= lo.entries - 1e-14 * lo.entries.max())


def test_deviation_norm_matches_brute_force(rng):
    for d in (0, 1, 2):
        n = 7 if d < 2 else 6
        pts = rng.uniform(-1, 1, size=(n, 3))
        labels = np.arange(n) % 2
        spec = TensorSpec("polar_affine", sigma=0.4, d=d)
        A = brute_unfold(spec, pts)
        P = brute_unfold(TensorSpec("perfect", d=d, labels=labels), pts)
        fro, x = deviation_norm(spec, pts, labels)
        ref = np.linalg.norm(A - P)
        assert fro == pytest.approx(ref, rel=1e-10)
        assert x == pytest.approx(ref**2 / n ** (d + 2), rel=1e-10)


def test_deviation_norm_extremes():
    d = 1
    pts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    labels = np.zeros(3, dtype=int)
    # perfect tensor against itself
    fro, _ = deviation_norm(TensorSpec("perfect", d=d, labels=labels), pts, labels)
    assert fro == 0.0
    # affinities numerically zero (huge curvature / tiny sigma) vs perfect: (d+2)! ordered tuples
    fro, _ = deviation_norm(TensorSpec("polar_affine", sigma=1e-6, d=d), pts, labels)
    assert fro**2 == pytest.approx(factorial(d + 2), rel=1e-12)


def test_save_load_roundtrip(tmp_path, rng):
    pts = rng.standard_normal((7, 2))
    spec = TensorSpec("polar_affine", sigma=0.3, d=1)
    W = weight_matrix(spec, pts)
    path = tmp_path / "w.csv"
    save_weight_matrix(path, W, spec)
    back, meta = load_weight_matrix(path)
    np.testing.assert_array_equal(back.entries, W.entries)
    np.testing.assert_array_equal(back.degrees, W.degrees)
    assert meta == {"N": "7", "d": "1", "variant": "polar_affine", "sigma": "0.3"}


def test_weight_matrix_isolated():
    W = WeightMatrix.from_entries(np.array([[1.0, 0.0], [0.0, 0.0]]))
    assert W.isolated.tolist() == [1]
