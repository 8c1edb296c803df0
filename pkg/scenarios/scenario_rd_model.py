import pytest
import numpy as np
from rdalloc import rd_model
from rdalloc.rd_model import OperatingPointGrid, RDSample, NormalizationStats, CentroidCurve, ClusterModel
from rdalloc.errors import IngestionError, ShapeError

grid = OperatingPointGrid([20, 30, 40])

def sample(chunk_id='c0', rates=(4000., 2000., 1000.), qualities=(44., 40., 36.)):
    return RDSample(chunk_id, rates, qualities, grid)

def test_grid_rejects_unordered_points():
    with pytest.raises(IngestionError):
        OperatingPointGrid([10, 30, 20])
    with pytest.raises(IngestionError):
        OperatingPointGrid([10])

def test_grid_index_of():
    assert grid.index_of(30) == 1
    assert grid.index_of(30.0 + 1e-12) == 1
    with pytest.raises(ShapeError):
        grid.index_of(25)

def test_sample_validation():
    with pytest.raises(IngestionError):
        sample(rates=(4000., 2000.))
    with pytest.raises(IngestionError):
        sample(rates=(4000., 0., -1.))
    with pytest.raises(IngestionError):
        sample(rates=(1000., 2000., 4000.))
    with pytest.raises(IngestionError):
        sample(qualities=(36., 40., 44.))
    with pytest.raises(IngestionError):
        sample(qualities=(44., float('nan'), 36.))

def test_sample_accepts_flat_segments():
    s = sample(rates=(4000., 4000., 1000.), qualities=(40., 40., 40.))
    assert s.s == 3

def test_rd_vector_layout():
    v = rd_model.to_rd_vector(sample())
    assert list(v) == [4000., 2000., 1000., 44., 40., 36.]
    back = rd_model.from_rd_vector('c0', v, grid)
    assert np.array_equal(back.rates, [4000., 2000., 1000.])
    assert np.array_equal(back.qualities, [44., 40., 36.])
    with pytest.raises(ShapeError):
        rd_model.from_rd_vector('c0', v[:5], grid)

def test_fit_normalization_sample_std():
    samples = [sample('a', (4000., 2000., 1000.)), sample('b', (6000., 3000., 1000.))]
    stats = rd_model.fit_normalization(samples)
    assert np.allclose(stats.means[:3], [5000., 2500., 1000.])
    # n - 1 divisor
    assert np.isclose(stats.stds[0], np.std([4000., 6000.], ddof=1))
    # constant components are clamped, not zero
    assert stats.stds[2] == rd_model.EPSILON_STD
    assert np.all(stats.stds[3:] == rd_model.EPSILON_STD)

def test_fit_normalization_needs_two_samples():
    with pytest.raises(IngestionError):
        rd_model.fit_normalization([sample()])

def test_normalize_inverts():
    samples = [sample('a', (4000., 2000., 1000.), (44., 40., 36.)),
               sample('b', (6000., 3000., 1500.), (42., 39., 33.)),
               sample('c', (5000., 2200., 900.), (45., 41., 35.))]
    stats = rd_model.fit_normalization(samples)
    X = rd_model.rd_matrix(samples)
    Z = rd_model.normalize(X, stats)
    assert np.allclose(Z.mean(axis=0), 0.0)
    assert np.allclose(rd_model.denormalize(Z, stats), X)
    with pytest.raises(ShapeError):
        rd_model.normalize(X[:, :4], stats)

def test_stats_reject_tiny_std():
    with pytest.raises(ShapeError):
        NormalizationStats([0., 0.], [1., 0.])

def test_repair_monotonicity_pools_violators():
    curve = CentroidCurve(0, [10., 12., 8.], [40., 41., 30.])
    fixed = rd_model.repair_monotonicity(curve)
    assert np.allclose(fixed.rates, [11., 11., 8.])
    assert np.allclose(fixed.qualities, [40.5, 40.5, 30.])
    assert fixed.is_monotone()
    assert not curve.is_monotone()

def test_repair_monotonicity_keeps_monotone_curves():
    curve = CentroidCurve(3, [9., 5., 5., 1.], [40., 38., 36., 30.])
    fixed = rd_model.repair_monotonicity(curve)
    assert fixed.cluster_id == 3
    assert np.array_equal(fixed.rates, curve.rates)
    assert np.array_equal(fixed.qualities, curve.qualities)

def test_normalized_training_set_has_unit_std():
    rng = np.random.default_rng(2)
    samples = [sample('c%d' % i, np.sort(rng.uniform(500., 8000., 3))[::-1], np.sort(rng.uniform(30., 46., 3))[::-1])
               for i in range(25)]
    stats = rd_model.fit_normalization(samples)
    Z = rd_model.normalize(rd_model.rd_matrix(samples), stats)
    assert np.allclose(Z.mean(axis=0), 0.0)
    assert np.allclose(Z.std(axis=0, ddof=1), 1.0)

def test_repair_monotonicity_is_idempotent_and_keeps_the_mean():
    rng = np.random.default_rng(4)
    for _ in range(20):
        curve = CentroidCurve(1, rng.uniform(100., 5000., 7), rng.uniform(25., 45., 7))
        fixed = rd_model.repair_monotonicity(curve)
        assert fixed.is_monotone()
        assert np.isclose(fixed.rates.mean(), curve.rates.mean())
        assert np.isclose(fixed.qualities.mean(), curve.qualities.mean())
        again = rd_model.repair_monotonicity(fixed)
        assert np.allclose(again.rates, fixed.rates)
        assert np.allclose(again.qualities, fixed.qualities)

def test_interpolate_curve():
    curve = CentroidCurve(0, [4000., 2000., 1000.], [44., 40., 36.])
    assert rd_model.interpolate_curve(curve, 25, grid) == (3000., 42.)
    assert rd_model.interpolate_curve(curve, 40, grid) == (1000., 36.)
    with pytest.raises(ShapeError):
        rd_model.interpolate_curve(curve, 45, grid)

def test_cluster_model_checks_ids_and_shapes():
    stats = NormalizationStats(np.zeros(6), np.ones(6))
    a = CentroidCurve(0, [3., 2., 1.], [40., 38., 36.])
    b = CentroidCurve(1, [6., 4., 2.], [42., 39., 35.])
    model = ClusterModel(grid, stats, [b, a], seed=5)
    assert model.k == 2
    assert [c.cluster_id for c in model.centroids] == [0, 1]
    assert model.rates.shape == (2, 3)
    assert np.allclose(model.normalized_centroids[1], [6., 4., 2., 42., 39., 35.])
    with pytest.raises(ShapeError):
        ClusterModel(grid, stats, [a, CentroidCurve(2, [6., 4., 2.], [42., 39., 35.])])
    with pytest.raises(ShapeError):
        ClusterModel(grid, NormalizationStats(np.zeros(4), np.ones(4)), [a])
