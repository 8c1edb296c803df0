import pytest
import numpy as np
from types import SimpleNamespace
from rdalloc import clustering, rd_model, synth_corpus
from rdalloc.clustering import KMeansConfig
from rdalloc.errors import RDAllocError, ShapeError

def blobs(n_per=40, centers=((0., 0.), (8., 8.)), spread=0.5, seed=3):
    rng = np.random.default_rng(seed)
    X = np.vstack([rng.normal(c, spread, size=(n_per, len(c))) for c in centers])
    truth = np.repeat(np.arange(len(centers)), n_per)
    return X, truth

def test_two_blob_recovery():
    X, truth = blobs()
    _, assignment = clustering.kmeans_fit(X, KMeansConfig(k=2, seed=1))
    # labels agree with the truth up to a permutation
    assert len(set(assignment.labels[truth == 0])) == 1
    assert len(set(assignment.labels[truth == 1])) == 1
    assert assignment.labels[0] != assignment.labels[-1]

def test_inertia_history_non_increasing():
    X, _ = blobs(centers=((0., 0.), (3., 0.), (0., 3.), (3., 3.)), spread=1.0)
    run = clustering.lloyd(X, 4, np.random.default_rng(0), max_iters=100, rel_tol=0.0)
    history = np.array(run.history)
    assert np.all(np.diff(history) <= 1e-9 * history[:-1])
    assert run.inertia == history[-1]

def test_fit_is_deterministic_across_worker_counts():
    X, _ = blobs(centers=((0., 0.), (3., 0.), (0., 3.)), spread=1.2)
    cfg = KMeansConfig(k=3, n_init=5, seed=11)
    c1, a1 = clustering.kmeans_fit(X, cfg, max_workers=1)
    c2, a2 = clustering.kmeans_fit(X, cfg, max_workers=4)
    assert np.array_equal(c1, c2)
    assert np.array_equal(a1.labels, a2.labels)
    assert a1.inertia == a2.inertia

def test_best_restart_wins():
    X, _ = blobs(centers=((0., 0.), (3., 0.), (0., 3.)), spread=1.2)
    # already in the canonical row order kmeans_fit clusters in
    X = X[np.lexsort(X.T[::-1])]
    cfg = KMeansConfig(k=3, n_init=6, seed=2)
    _, assignment = clustering.kmeans_fit(X, cfg)
    restarts = [clustering.lloyd(X, 3, np.random.default_rng([cfg.seed, r]), cfg.max_iters, cfg.rel_tol)
                for r in range(cfg.n_init)]
    assert assignment.inertia == min(run.inertia for run in restarts)

def test_k_equal_n_has_zero_inertia():
    X = np.arange(12, dtype=float).reshape(6, 2)
    _, assignment = clustering.kmeans_fit(X, KMeansConfig(k=6, n_init=2))
    assert assignment.inertia == 0.0
    assert sorted(assignment.labels) == list(range(6))

def test_identical_points():
    X = np.ones((5, 3))
    centroids, assignment = clustering.kmeans_fit(X, KMeansConfig(k=3, n_init=2))
    assert assignment.inertia == 0.0
    assert np.allclose(centroids, 1.0)

def test_too_few_points():
    with pytest.raises(RDAllocError):
        clustering.kmeans_fit(np.zeros((2, 2)), KMeansConfig(k=3))
    with pytest.raises(ShapeError):
        clustering.kmeans_fit(np.zeros(4), KMeansConfig(k=1))

def test_assign_nearest_matches_distance_scan():
    rng = np.random.default_rng(5)
    centroids = rng.normal(size=(6, 4))
    model = SimpleNamespace(normalized_centroids=centroids)
    for _ in range(200):
        v = rng.normal(size=4) * 2
        expected = int(np.argmin([np.sum((v - c) ** 2) for c in centroids]))
        assert clustering.assign_nearest(v, model) == expected
    assert list(clustering.assign_all(centroids, model)) == list(range(6))
    with pytest.raises(ShapeError):
        clustering.assign_nearest(np.zeros(3), model)

def test_assign_nearest_tie_goes_to_lowest_id():
    model = SimpleNamespace(normalized_centroids=np.array([[1., 0.], [-1., 0.]]))
    assert clustering.assign_nearest(np.zeros(2), model) == 0

def test_mean_relative_error():
    X = np.array([[3., 4.], [0., 5.]])
    centroids = np.array([[3., 0.]])
    # |(0,4)| + |(-3,5)| over |x| sums
    expected = (4.0 + np.sqrt(34.0)) / 10.0
    assert np.isclose(clustering.mean_relative_error(X, centroids, [0, 0]), expected)
    with pytest.raises(RDAllocError):
        clustering.mean_relative_error(np.zeros((2, 2)), centroids, [0, 0])

def test_error_vs_k_sweep():
    X, _ = blobs(centers=((0., 0.), (6., 0.), (0., 6.)), spread=0.4)
    X = X + 10.0
    sweep = clustering.error_vs_k_sweep(X, [1, 2, 3, 4], KMeansConfig(n_init=3, seed=4))
    ks = [k for k, _ in sweep]
    errors = np.array([e for _, e in sweep])
    assert ks == [1, 2, 3, 4]
    assert errors[2] < 0.5 * errors[0]
    assert errors[3] <= errors[2] + 1e-3
    again = clustering.error_vs_k_sweep(X, [1, 2, 3, 4], KMeansConfig(n_init=3, seed=4))
    assert sweep == again

def test_cluster_samples(small_corpus):
    cfg, samples, _, labels = small_corpus
    model, assigned = clustering.cluster_samples(samples, KMeansConfig(k=3, n_init=4, seed=0), cfg.grid)
    assert model.k == 3
    assert model.grid == cfg.grid
    assert model.seed == 0
    assert all(c.is_monotone() for c in model.centroids)
    assert len(assigned) == len(samples)
    # archetypes are far apart: one cluster per archetype
    for label in range(3):
        assert len(set(assigned[np.array(labels) == label])) == 1
    assert len(set(assigned)) == 3

@pytest.mark.slow
def test_elbow_on_default_corpus():
    cfg = synth_corpus.SynthConfig(n_chunks=2000, k_true=10, seed=0)
    samples, _, _ = synth_corpus.generate(cfg)
    stats = rd_model.fit_normalization(samples)
    X = rd_model.normalize(rd_model.rd_matrix(samples, cfg.grid), stats)
    sweep = dict(clustering.error_vs_k_sweep(X, range(1, 16), KMeansConfig(n_init=3, seed=0)))
    assert sweep[10] < 0.4 * sweep[1]
    # improvement beyond k=10 measured against the single-cluster error
    assert sweep[10] - sweep[15] < 0.1 * sweep[1]

def test_shuffled_rows_give_the_same_clustering():
    cfg = synth_corpus.SynthConfig(n_chunks=300, k_true=8, seed=5)
    samples, _, _ = synth_corpus.generate(cfg)
    X = rd_model.normalize(rd_model.rd_matrix(samples, cfg.grid), rd_model.fit_normalization(samples))
    perm = np.random.default_rng(1).permutation(len(X))
    kcfg = KMeansConfig(k=8, n_init=3, seed=5)
    c1, a1 = clustering.kmeans_fit(X, kcfg)
    c2, a2 = clustering.kmeans_fit(X[perm], kcfg)
    assert abs(a1.inertia - a2.inertia) <= 1e-9
    assert np.array_equal(c1, c2)
    assert np.array_equal(a1.labels[perm], a2.labels)

def test_single_cluster_is_the_mean():
    X, _ = blobs(centers=((0., 0.), (3., 1.)), spread=1.0)
    centroids, assignment = clustering.kmeans_fit(X, KMeansConfig(k=1, n_init=2))
    assert np.allclose(centroids[0], X.mean(axis=0))
    assert np.isclose(assignment.inertia, X.var(axis=0).sum() * len(X))
    assert set(assignment.labels) == {0}

def test_subsample_is_seeded_and_ordered():
    X = np.arange(40, dtype=float).reshape(20, 2)
    part = clustering.subsample(X, 8, seed=3)
    assert part.shape == (8, 2)
    assert np.all(np.diff(part[:, 0]) > 0)
    assert np.array_equal(part, clustering.subsample(X, 8, seed=3))
    assert np.array_equal(clustering.subsample(X, 20, seed=3), X)
    with pytest.raises(RDAllocError):
        clustering.subsample(X, 21, seed=3)
    with pytest.raises(RDAllocError):
        clustering.subsample(X, 0, seed=3)

def test_error_vs_n_sweep():
    X, _ = blobs(n_per=30, centers=((0., 0.), (6., 0.), (0., 6.)), spread=0.8)
    cfg = KMeansConfig(n_init=2, seed=4)
    rows = clustering.error_vs_n_sweep(X, [3, 45, 90], [1, 2, 3, 4], cfg)
    # k above n is skipped
    assert [(n, k) for n, k, _ in rows] == [(3, 1), (3, 2), (3, 3), (45, 1), (45, 2), (45, 3), (45, 4),
                                           (90, 1), (90, 2), (90, 3), (90, 4)]
    errors = dict(((n, k), e) for n, k, e in rows)
    assert errors[(3, 3)] == 0.0
    # the full set reproduces the plain k sweep
    assert [errors[(90, k)] for k in (1, 2, 3, 4)] == [e for _, e in clustering.error_vs_k_sweep(X, [1, 2, 3, 4], cfg)]
    assert rows == clustering.error_vs_n_sweep(X, [3, 45, 90], [1, 2, 3, 4], cfg)
