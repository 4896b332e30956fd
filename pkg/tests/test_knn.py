import json

import numpy as np
import pytest

from mlvalid.core import Dataset
from mlvalid.knn import GLOBAL, KnnIndex
from mlvalid.prob import INSUFFICIENT

from conftest import class_schema


def brute_reference(Z, k):
    """Quadratic scan: median over rows of mean distance to k nearest others."""
    n = len(Z)
    m = min(k, n - 1)
    means = []
    for r in range(n):
        d = sorted(float(np.sqrt(((Z[s] - Z[r]) ** 2).sum())) for s in range(n) if s != r)
        means.append(np.mean(np.array(d[:m])))
    return float(np.median(means))


def brute_query(index, z, j, c):
    rows = [r for r in range(len(index.Z)) if index.cells[r, j] == c]
    scored = sorted((float(np.sqrt(((index.Z[r] - z) ** 2).sum())), r) for r in rows)[: index.k]
    d_bar = float(np.mean([d for d, _ in scored]))
    return [r for _, r in scored], 1.0 / (1.0 + d_bar / max(index.d_ref[j][c], index.eps))


def fixture(rng, n=100, n_features=3, classes=2):
    X = rng.normal(0, 1, (n, n_features)) * [1.0, 50.0, 0.01][:n_features]
    y = rng.integers(0, classes, (n, 1))
    return Dataset(class_schema(n_features, classes=classes), X, y)


def test_identical_rows_have_zero_reference():
    ds = Dataset(class_schema(2), [[1.0, 2.0]] * 3, [[0]] * 3)
    idx = KnnIndex.fit(ds, ds.Y, k=2)
    assert idx.d_ref[0][0] == 0.0


def test_fit_deterministic():
    rng = np.random.default_rng(1)
    ds = fixture(rng)
    a = json.dumps(KnnIndex.fit(ds, ds.Y).to_dict(), sort_keys=True)
    b = json.dumps(KnnIndex.fit(ds, ds.Y).to_dict(), sort_keys=True)
    assert a == b


def test_default_k_is_feature_count():
    ds = fixture(np.random.default_rng(0))
    assert KnnIndex.fit(ds, ds.Y).k == 3


def test_reference_distance_matches_brute_force():
    rng = np.random.default_rng(7)
    ds = fixture(rng)
    idx = KnnIndex.fit(ds, ds.Y)
    for c in range(2):
        Zc = idx.Z[idx.cells[:, 0] == c]
        assert idx.d_ref[0][c] == brute_reference(Zc, idx.k)


def test_standardization():
    ds = fixture(np.random.default_rng(3))
    idx = KnnIndex.fit(ds, ds.Y)
    np.testing.assert_allclose(idx.Z.mean(axis=0), 0, atol=1e-12)
    np.testing.assert_allclose(idx.Z.std(axis=0), 1, atol=1e-12)
    const = Dataset(class_schema(2), [[5.0, 1.0], [5.0, 2.0], [5.0, 3.0]], [[0]] * 3)
    idx = KnnIndex.fit(const, const.Y, k=1)
    np.testing.assert_array_equal(idx.Z[:, 0], [5.0, 5.0, 5.0])


def test_query_on_duplicates_is_one():
    ds = Dataset(class_schema(2, classes=2), [[1.0, 1.0]] * 2 + [[4.0, 0.0]] * 3, [[0]] * 2 + [[1]] * 3)
    idx = KnnIndex.fit(ds, ds.Y, k=2)
    r = idx.validity([1.0, 1.0], [0])
    assert r.outputs[0].validity == 1.0
    assert r.outputs[0].neighbors == [0, 1]


def test_mean_distance_equal_to_reference_gives_half():
    rng = np.random.default_rng(8)
    ds = fixture(rng)
    idx = KnnIndex.fit(ds, ds.Y)
    out = idx.validity([0.3, 10.0, 0.0], [1]).outputs[0]
    idx.d_ref[0][1] = out.mean_distance
    assert idx.validity([0.3, 10.0, 0.0], [1]).outputs[0].validity == 0.5


def test_validity_matches_oracle():
    rng = np.random.default_rng(9)
    ds = fixture(rng, n=50)
    idx = KnnIndex.fit(ds, ds.Y)
    for _ in range(200):
        x = rng.normal(0, 2, 3) * [1.0, 50.0, 0.01]
        c = int(rng.integers(0, 2))
        out = idx.validity(x, [c]).outputs[0]
        nbrs, want = brute_query(idx, idx.transform(x), 0, c)
        assert out.neighbors == nbrs
        assert abs(out.validity - want) <= 1e-12
        assert 0.0 < out.validity <= 1.0


def test_tie_break_lowest_index():
    ds = Dataset(class_schema(1), [[0.0], [2.0], [-2.0], [2.0]], [[0]] * 4)
    idx = KnnIndex.fit(ds, ds.Y, k=2)
    # rows 1, 2, 3 are all at the same standardized distance from 0
    assert idx.validity([0.0], [0]).outputs[0].neighbors == [0, 1]


def test_monotone_in_distance():
    rng = np.random.default_rng(11)
    ds = fixture(rng)
    idx = KnnIndex.fit(ds, ds.Y)
    centre = ds.X[ds.Y[:, 0] == 0].mean(axis=0)
    direction = np.array([1.0, 50.0, 0.01])
    vals = [idx.validity(centre + t * direction, [0]).outputs[0].validity for t in np.linspace(3, 30, 10)]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_scale_invariance():
    rng = np.random.default_rng(12)
    ds = fixture(rng)
    scaled = Dataset(ds.schema, ds.X * [1.0, 7.5, 1.0], ds.Y)
    a = KnnIndex.fit(ds, ds.Y)
    b = KnnIndex.fit(scaled, ds.Y)
    for _ in range(50):
        x = rng.normal(0, 1, 3) * [1.0, 50.0, 0.01]
        c = [int(rng.integers(0, 2))]
        va = a.validity(x, c).outputs[0].validity
        vb = b.validity(x * [1.0, 7.5, 1.0], c).outputs[0].validity
        assert va == pytest.approx(vb, rel=1e-9)


def test_insufficient_cell():
    ds = Dataset(class_schema(2, classes=3), [[0.0, 0.0], [1.0, 1.0], [2.0, 0.5]], [[0], [0], [1]])
    idx = KnnIndex.fit(ds, ds.Y, k=2)
    assert idx.validity([0, 0], [1]).outputs[0].status == INSUFFICIENT
    assert idx.validity([0, 0], [2]).outputs[0].status == INSUFFICIENT
    assert idx.validity([0, 0], [0]).outputs[0].validity is not None


def test_global_variant_label_agreement():
    ds = Dataset(class_schema(1), [[0.0], [0.1], [0.2], [5.0], [5.1]], [[0], [0], [1], [1], [1]])
    idx = KnnIndex.fit(ds, ds.Y, k=3, variant=GLOBAL)
    out = idx.validity([0.05], [0]).outputs[0]
    assert out.agreement == pytest.approx(2 / 3)
    assert out.validity == pytest.approx(2 / 3 / (1 + out.mean_distance / idx.d_ref))


def test_roundtrip():
    ds = fixture(np.random.default_rng(4))
    idx = KnnIndex.fit(ds, ds.Y)
    back = KnnIndex.from_dict(json.loads(json.dumps(idx.to_dict())))
    x = [0.1, 2.0, 0.0]
    assert back.validity(x, [1]).outputs[0].validity == idx.validity(x, [1]).outputs[0].validity
