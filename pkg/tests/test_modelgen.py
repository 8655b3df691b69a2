import numpy as np
import pytest

from tscc.diagnostics import subspace_distance
from tscc.modelgen import (
    Dataset,
    Flat,
    MixtureModel,
    builtin_sampler,
    fit_lsq_flat,
    load_model_config,
    random_lines_model,
    read_dataset_csv,
    sample_mixture,
    write_dataset_csv,
)


def test_flat_validation_and_distance():
    f = Flat([0.0, 0.0, 1.0], [[2.0, 0.0, 0.0]])
    np.testing.assert_allclose(f.frame, [[1, 0, 0]])
    assert f.d == 1 and f.D == 3
    assert f.distance([[5.0, 3.0, 1.0]])[0] == pytest.approx(3.0)
    with pytest.raises(ValueError):
        Flat([0.0, 0.0], np.eye(2))


def test_model_validation():
    f = Flat([0.0, 0.0], [[1.0, 0.0]])
    with pytest.raises(ValueError):
        MixtureModel([f], [2])
    with pytest.raises(ValueError):
        MixtureModel([f, f], [5])
    with pytest.raises(ValueError):
        MixtureModel([f], [5], noise=-1)
    with pytest.raises(ValueError):
        MixtureModel([f, Flat([0.0, 0.0, 0.0], [[1.0, 0, 0]])], [5, 5])


def test_clean_samples_on_flats_and_counts():
    model = random_lines_model(3, 25, 0.0, seed=7)
    ds = sample_mixture(model)
    assert ds.points.shape == (75, 2)
    assert ds.sizes.tolist() == [25, 25, 25]
    for k, flat in enumerate(model.flats):
        assert np.max(flat.distance(ds.points[ds.labels == k])) < 1e-12
    # chord stays inside the unit square
    assert ds.points.min() >= -1e-12 and ds.points.max() <= 1 + 1e-12


def test_determinism_and_ordering():
    flats = [Flat([0.0, 0.0], [[1.0, 0.0]]), Flat([0.0, 1.0], [[1.0, 1.0]])]
    m = MixtureModel(flats, [9, 4], 1.0, 0.05, seed=3)
    a, b = sample_mixture(m), sample_mixture(m)
    np.testing.assert_array_equal(a.points, b.points)
    assert a.sizes.tolist() == [4, 9]  # nondecreasing sizes
    assert np.max(flats[1].distance(a.points[a.labels == 0])) > 0


def test_noise_is_orthogonal():
    f = Flat([0.0, 0.0, 0.0], [[1.0, 0.0, 0.0]])
    ds = sample_mixture(MixtureModel([f], [4000], 1.0, 0.1, seed=1))
    # in-flat coordinate stays uniform on [-1, 1]; offset has sd 0.1 * 2
    assert np.abs(ds.points[:, 0]).max() <= 1.0
    assert np.std(ds.points[:, 1]) == pytest.approx(0.2, rel=0.05)


def test_builtin_samplers_support():
    rng = np.random.default_rng(0)
    seg = builtin_sampler("segment", L=1.0)(rng, 1000)
    assert np.all((seg[:, 0] >= 0) & (seg[:, 0] <= 1)) and np.all(seg[:, 1] == 0)
    ang = builtin_sampler("angled_line", L=2.0, theta=np.pi / 6)(rng, 500)
    np.testing.assert_allclose(ang[:, 1] / ang[:, 0], np.tan(np.pi / 6), rtol=1e-12)
    eps = 0.1
    r1 = builtin_sampler("rectangle_strip", L=1.0, eps=eps)(rng, 20000)
    assert np.all((r1[:, 0] >= eps) & (r1[:, 0] <= 1 + eps) & (r1[:, 1] >= 0) & (r1[:, 1] <= eps))
    se = r1[:, 1].std(ddof=1) / np.sqrt(len(r1))
    assert abs(r1[:, 1].mean() - eps / 2) < 3 * se
    r2 = builtin_sampler("rectangle_strip", L=1.0, eps=eps, orientation="vertical")(rng, 100)
    assert np.all(r2[:, 0] <= eps) and np.all(r2[:, 1] >= eps)
    d1 = builtin_sampler("half_disk_3d", orientation="D1")(rng, 5000)
    assert np.all(np.abs(d1[:, 0]) <= 1e-12)
    rho = np.hypot(d1[:, 1], d1[:, 2])
    phi = np.arctan2(d1[:, 2], d1[:, 1])
    assert np.all(rho <= 1 + 1e-12) and np.all((phi >= -1e-12) & (phi <= np.pi + 1e-12))
    d2 = builtin_sampler("half_disk_3d", orientation="D2")(rng, 5000)
    assert np.all(d2[:, 2] == 0) and np.all(d2[:, 0] >= -1e-12)
    # area-uniform: P(rho <= 1/2) = 1/4
    assert np.mean(rho <= 0.5) == pytest.approx(0.25, abs=0.03)
    with pytest.raises(ValueError):
        builtin_sampler("sphere")
    with pytest.raises(ValueError):
        builtin_sampler("rectangle_strip", orientation="diagonal")


def test_fit_lsq_flat_examples():
    _, e2 = fit_lsq_flat([[0, 0], [1, 1], [3, 3]], 1)
    assert e2 == pytest.approx(0, abs=1e-15)
    _, e2 = fit_lsq_flat([[0, 0], [1, 0], [0, 1]], 1)
    assert e2 == pytest.approx(1 / 3, rel=1e-12)
    with pytest.raises(ValueError):
        fit_lsq_flat([[0, 0]], 1)


def test_fit_monotone_in_d(rng):
    X = rng.standard_normal((30, 4))
    errs = [fit_lsq_flat(X, d)[1] for d in range(4)]
    assert all(a >= b - 1e-12 for a, b in zip(errs, errs[1:]))


def test_fit_recovers_generating_flats():
    flats = [Flat([0.0, 0.0, 0.0], [[1.0, 0, 0], [0, 1.0, 1.0]]), Flat([1.0, 0.0, 2.0], [[0, 0, 1.0], [1.0, 2.0, 0]])]
    ds = sample_mixture(MixtureModel(flats, [20, 30], 1.0, 0.0, seed=2))
    for k, f in enumerate(flats):
        fit, e2 = fit_lsq_flat(ds.points[ds.labels == k], 2)
        assert e2 < 1e-12
        assert subspace_distance(fit.frame.T, f.frame.T) < 1e-6


def test_csv_roundtrip(tmp_path):
    ds = sample_mixture(random_lines_model(2, 6, 0.02, seed=1))
    path = tmp_path / "d.csv"
    write_dataset_csv(path, ds)
    back = read_dataset_csv(path)
    np.testing.assert_array_equal(back.points, ds.points)
    np.testing.assert_array_equal(back.labels, ds.labels)
    assert path.read_text().splitlines()[0] == "x1,x2,label"
    nolab = tmp_path / "n.csv"
    write_dataset_csv(nolab, Dataset(ds.points))
    assert read_dataset_csv(nolab).labels is None
    bad = tmp_path / "b.csv"
    bad.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        read_dataset_csv(bad)


def test_model_config(tmp_path):
    p = tmp_path / "m.toml"
    p.write_text('model = "three_lines"\nseed = 4\nnoise = 0.01\nn_per_line = 7\n')
    m = load_model_config(p)
    assert m.sizes == [7, 7, 7] and m.seed == 4 and m.noise == 0.01
    q = tmp_path / "f.toml"
    q.write_text(
        "seed = 2\n[[flat]]\nbase = [0.0, 0.0]\nframe = [[1.0, 0.0]]\nsize = 5\n"
        "[[flat]]\nbase = [0.0, 1.0]\nframe = [[0.0, 1.0]]\nsize = 6\nextent = 0.5\n"
    )
    m = load_model_config(q)
    assert m.sizes == [5, 6] and m.extent.tolist() == [1.0, 0.5]
    e = tmp_path / "e.toml"
    e.write_text("seed = 1\n")
    with pytest.raises(ValueError):
        load_model_config(e)
