import numpy as np
import pytest
from helpers import brute_force_sphere
from hypothesis import given
from hypothesis import strategies as st

from uncmap.gaussians import GaussianMap
from uncmap.geometry import InputError
from uncmap.value_map import FEATURE_DIM, Norms, ValueMap, ValueQueryResult, featurize, query_sphere


def value_map(seed, n=400):
    rng = np.random.default_rng(seed)
    return GaussianMap.from_fields(rng.uniform(-3, 3, (n, 3)), rng.uniform(0.01, 0.1, (n, 3)),
                                   np.tile([1.0, 0, 0, 0], (n, 1)), rng.uniform(0, 1, n), rng.uniform(0, 1, (n, 3)),
                                   rng.normal(size=(n, 3)), rng.uniform(0, 1, n), rng.uniform(0, 1, n),
                                   rng.normal(size=n))


def reference(m, idx):
    """Aggregate by hand from float64 copies of the stored records."""
    if len(idx) == 0:
        return 0, 0.0, 0.0, 0.0, (0.0, 0.0, 0.0), 0.0
    a = m.alpha[idx]
    cen = (a[:, None] * m.s[idx]).sum(0) / a.sum()
    return len(idx), m.ug[idx].mean(), m.us[idx].mean(), m.ua[idx].mean(), tuple(cen), a.sum()


def test_whole_scene_radius():
    m = value_map(0)
    assert query_sphere(m, (0.0, 0.0, 0.0), 100.0).count == len(m)


def test_empty_region_flagged():
    r = query_sphere(value_map(0), (50.0, 50.0, 50.0), 0.5)
    assert r.empty and r.count == 0
    assert (r.mean_ug, r.mean_us, r.mean_ua, r.occupancy) == (0.0, 0.0, 0.0, 0.0)


def test_boundary_inclusive():
    m = GaussianMap.from_fields([[1.0, 0, 0]], [[0.1] * 3], [[1, 0, 0, 0]], [0.5], [[0] * 3], [[0] * 3])
    assert query_sphere(m, (0.0, 0.0, 0.0), 1.0).count == 1


def test_thousand_queries_equal_brute_force():
    m = value_map(7)
    vm = ValueMap(m, 0.75)
    rng = np.random.default_rng(1)
    mu = m.mu
    for _ in range(1000):
        c = rng.uniform(-3.5, 3.5, 3)
        r = float(rng.uniform(0.05, 0.75))
        got = vm.query(c, r)
        idx = brute_force_sphere(mu, c, r)
        assert got == ValueQueryResult.from_indices(m, idx)
        assert got.count == reference(m, idx)[0]


@given(st.integers(0, 10_000), st.floats(0.05, 3.0),
       st.tuples(st.floats(-4, 4), st.floats(-4, 4), st.floats(-4, 4)))
def test_query_any_radius_matches_hand_aggregate(seed, radius, center):
    m = value_map(seed, 120)
    got = query_sphere(m, center, radius)
    ref = reference(m, brute_force_sphere(m.mu, center, radius))
    assert got.count == ref[0]
    assert np.allclose([got.mean_ug, got.mean_us, got.mean_ua, got.occupancy], [ref[1], ref[2], ref[3], ref[5]],
                       rtol=1e-12, atol=1e-12)
    assert np.allclose(got.sem_centroid, ref[4], rtol=1e-12, atol=1e-12)


def test_radius_must_be_positive():
    with pytest.raises(InputError):
        query_sphere(value_map(0), (0, 0, 0), 0.0)


def test_featurize_extremes_and_midpoint():
    norms = Norms()
    norms.update([[0.1, 0.2, -5.0], [0.5, 0.6, 3.0]])
    lo = ValueQueryResult(3, 0.1, 0.2, -5.0, (1.0, 0.0, 0.0), 2.0)
    hi = ValueQueryResult(3, 0.5, 0.6, 3.0, (1.0, 0.0, 0.0), 2.0)
    mid = ValueQueryResult(3, 0.3, 0.4, -1.0, (1.0, 0.0, 0.0), 2.0)
    assert featurize(lo, norms)[4:].tolist() == [0.0, 0.0, 0.0]
    assert np.allclose(featurize(hi, norms)[4:], 1.0)
    assert np.allclose(featurize(mid, norms)[4:], 0.5, atol=1e-9)
    f = featurize(mid, norms)
    assert f.shape == (FEATURE_DIM,)
    assert f[0] == 2.0 and f[1:4].tolist() == [1.0, 0.0, 0.0]


def test_degenerate_norms_give_zero():
    norms = Norms([1.0, 1.0, 1.0], [1.0, 2.0, 1.0])
    f = featurize(ValueQueryResult(1, 1.0, 1.5, 1.0, (0, 0, 0), 1.0), norms)
    assert f[4] == 0.0 and f[6] == 0.0 and f[5] == 0.5


def test_uninitialized_norms_rejected():
    with pytest.raises(InputError):
        featurize(ValueQueryResult(1, 1.0, 1.0, 1.0, (0, 0, 0), 1.0), Norms())


@given(st.floats(-10, 10), st.floats(-10, 10))
def test_featurize_monotone(a, b):
    norms = Norms([-5.0] * 3, [5.0] * 3)
    lo, hi = min(a, b), max(a, b)
    for k in range(3):
        va, vb = [0.0] * 3, [0.0] * 3
        va[k], vb[k] = lo, hi
        fa = featurize(ValueQueryResult(1, *va, (0, 0, 0), 1.0), norms)
        fb = featurize(ValueQueryResult(1, *vb, (0, 0, 0), 1.0), norms)
        assert fa[4 + k] <= fb[4 + k]
        assert 0.0 <= fa[4 + k] <= 1.0


def test_csv_row_shape():
    r = query_sphere(value_map(2), (0.0, 0.0, 0.0), 1.0)
    assert len(r.csv_row().split(",")) == len(ValueQueryResult.CSV_HEADER.split(","))
