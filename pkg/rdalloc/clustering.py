"""
k-means over normalized R-D vectors (k-means++ seeding, seeded restarts),
centroid extraction and the relative-error-vs-k diagnostic.
"""
import logging
from collections import namedtuple
import numpy as np
from rdalloc import rd_model
from rdalloc.errors import RDAllocError, ShapeError
from rdalloc.tasks import run_parallel
from logutils.events import log_event

logger = logging.getLogger(__name__)

ClusterAssignment = namedtuple('ClusterAssignment', ['labels', 'inertia'])

# Per-restart trace kept for diagnostics and tests
KMeansRun = namedtuple('KMeansRun', ['centroids', 'labels', 'inertia', 'history'])

DEFAULT_K = 10


class KMeansConfig(object):
    def __init__(self, k=DEFAULT_K, max_iters=300, rel_tol=1e-6, n_init=10, seed=0):
        if int(k) < 1:
            raise ValueError("k must be at least 1, got %r" % k)
        if int(max_iters) < 1 or int(n_init) < 1:
            raise ValueError("max_iters and n_init must be positive")
        if not rel_tol >= 0:
            raise ValueError("rel_tol must be non-negative")
        if not 0 <= int(seed) < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        self.k = int(k)
        self.max_iters = int(max_iters)
        self.rel_tol = float(rel_tol)
        self.n_init = int(n_init)
        self.seed = int(seed)

    def replace(self, **kwargs):
        params = dict(k=self.k, max_iters=self.max_iters, rel_tol=self.rel_tol, n_init=self.n_init, seed=self.seed)
        params.update(kwargs)
        return KMeansConfig(**params)


def _check_vectors(vectors):
    X = np.asarray(vectors, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ShapeError("expected a non-empty n x d matrix, got shape %s" % (X.shape,))
    if not np.all(np.isfinite(X)):
        raise RDAllocError("non-finite values in clustering input")
    return X


def squared_distances(X, centroids):
    diff = X[:, None, :] - centroids[None, :, :]
    return np.einsum('nkd,nkd->nk', diff, diff)


def kmeans_plusplus(X, k, rng):
    n = X.shape[0]
    centroids = np.empty((k, X.shape[1]))
    centroids[0] = X[rng.integers(0, n)]
    dist_sq = squared_distances(X, centroids[:1])[:, 0]
    for i in range(1, k):
        total = dist_sq.sum()
        if total > 0:
            idx = rng.choice(n, p=dist_sq / total)
        else:
            idx = rng.integers(0, n)
        centroids[i] = X[idx]
        dist_sq = np.minimum(dist_sq, squared_distances(X, centroids[i:i + 1])[:, 0])
    return centroids


def _assign(X, centroids):
    d2 = squared_distances(X, centroids)
    labels = np.argmin(d2, axis=1)
    own = d2[np.arange(len(X)), labels]
    return labels, own, float(np.sum(own))


def _update(X, labels, own, centroids):
    k = len(centroids)
    counts = np.bincount(labels, minlength=k)
    new = np.zeros_like(centroids)
    np.add.at(new, labels, X)
    filled = counts > 0
    new[filled] /= counts[filled][:, None]
    if not np.all(filled):
        # re-seed each empty cluster with the point farthest from its centroid
        remaining = own.copy()
        for j in np.flatnonzero(~filled):
            far = int(np.argmax(remaining))
            new[j] = X[far]
            remaining[far] = -1.0
            log_event('cluster', 'kmeans.reseed', show=False, cluster=int(j))
    return new


def lloyd(X, k, rng, max_iters, rel_tol):
    centroids = kmeans_plusplus(X, k, rng)
    labels, own, inertia = _assign(X, centroids)
    history = [inertia]
    for _ in range(max_iters):
        centroids = _update(X, labels, own, centroids)
        labels, own, new_inertia = _assign(X, centroids)
        history.append(new_inertia)
        done = inertia - new_inertia <= rel_tol * inertia
        inertia = new_inertia
        if done or inertia == 0:
            break
    return KMeansRun(centroids, labels, inertia, history)


def kmeans_fit(vectors, cfg, max_workers=4):
    """
    Best of `cfg.n_init` k-means++/Lloyd runs by inertia. Restart r is seeded
    from (cfg.seed, r) so the result does not depend on scheduling. Rows are
    clustered in lexicographic order, so permuting the input only permutes
    the labels.

    Returns (centroids in normalized space, ClusterAssignment).
    """
    X = _check_vectors(vectors)
    if X.shape[0] < cfg.k:
        raise RDAllocError("k-means needs at least k=%d vectors, got %d" % (cfg.k, X.shape[0]))
    # lexsort keys run last-to-first: first column is the primary key
    order = np.lexsort(X.T[::-1])
    canonical = X[order]

    def restart(r):
        rng = np.random.default_rng([cfg.seed, r])
        return lloyd(canonical, cfg.k, rng, cfg.max_iters, cfg.rel_tol)

    runs = run_parallel(restart, range(cfg.n_init), max_workers=max_workers)
    best = 0
    for r, run in enumerate(runs):
        log_event('cluster', 'kmeans.restart', show=False, restart=r, inertia=run.inertia,
                  iterations=len(run.history) - 1)
        if run.inertia < runs[best].inertia:
            best = r
    run = runs[best]
    log_event('cluster', 'kmeans.done', show=False, k=cfg.k, inertia=run.inertia)
    labels = np.empty(len(X), dtype=int)
    labels[order] = run.labels
    return run.centroids, ClusterAssignment(labels, run.inertia)


def assign_nearest(vector, model):
    """Closest centroid in normalized space; ties go to the lowest id."""
    v = np.asarray(vector, dtype=float)
    if v.shape != (model.normalized_centroids.shape[1],):
        raise ShapeError("vector of length %d, model expects %d" % (v.size, model.normalized_centroids.shape[1]))
    d2 = squared_distances(v[None, :], model.normalized_centroids)[0]
    return int(np.argmin(d2))


def assign_all(vectors, model):
    X = _check_vectors(vectors)
    if X.shape[1] != model.normalized_centroids.shape[1]:
        raise ShapeError("vectors of length %d, model expects %d" % (X.shape[1], model.normalized_centroids.shape[1]))
    return np.argmin(squared_distances(X, model.normalized_centroids), axis=1).astype(int)


def mean_relative_error(vectors, centroids, assignment):
    """
    sum_i ||x_i - mu_label(i)|| / sum_i ||x_i||, with `centroids` either a
    ClusterModel or an array of normalized centroids.
    """
    X = _check_vectors(vectors)
    if isinstance(centroids, rd_model.ClusterModel):
        centroids = centroids.normalized_centroids
    labels = np.asarray(assignment.labels if hasattr(assignment, 'labels') else assignment, dtype=int)
    if len(labels) != len(X):
        raise ShapeError("%d labels for %d vectors" % (len(labels), len(X)))
    denominator = np.sum(np.linalg.norm(X, axis=1))
    if denominator == 0:
        raise RDAllocError("relative error undefined: every vector is zero")
    residual = np.sum(np.linalg.norm(X - np.asarray(centroids)[labels], axis=1))
    return float(residual / denominator)


def error_vs_k_sweep(vectors, k_values, cfg, max_workers=4):
    """Observed mean relative error for every k; seeds derived from (cfg.seed, k)."""
    X = _check_vectors(vectors)
    results = []
    for k in k_values:
        derived = int(np.random.SeedSequence([cfg.seed, int(k)]).generate_state(2, dtype=np.uint64)[0])
        centroids, assignment = kmeans_fit(X, cfg.replace(k=k, seed=derived), max_workers=max_workers)
        error = mean_relative_error(X, centroids, assignment)
        log_event('cluster', 'sweep.point', k=int(k), error=error)
        results.append((int(k), error))
    return results


def subsample(X, n, seed):
    """n rows drawn without replacement from a stream seeded by (seed, n), kept in input order."""
    if not 1 <= n <= len(X):
        raise RDAllocError("subsample of %d from %d vectors" % (n, len(X)))
    rng = np.random.default_rng([int(seed), 0x7375625f, int(n)])
    return X[np.sort(rng.choice(len(X), size=int(n), replace=False))]


def error_vs_n_sweep(vectors, n_values, k_values, cfg, max_workers=4):
    """
    The error-vs-k sweep repeated on seeded training subsets of every size
    in `n_values`; returns (n, k, mean_relative_error) rows.
    """
    X = _check_vectors(vectors)
    rows = []
    for n in n_values:
        part = subsample(X, int(n), cfg.seed)
        for k, error in error_vs_k_sweep(part, [k for k in k_values if k <= n], cfg, max_workers=max_workers):
            rows.append((int(n), k, error))
    return rows


def cluster_samples(samples, cfg, grid=None, max_workers=4):
    """
    Normalize, cluster, denormalize and repair the centroids of a training
    set. Returns the ClusterModel and each sample's nearest-centroid label
    under that model.
    """
    if grid is None:
        grid = rd_model.OperatingPointGrid(range(samples[0].s)) if samples else None
    stats = rd_model.fit_normalization(samples)
    X = rd_model.normalize(rd_model.rd_matrix(samples, grid), stats)
    centroids, _ = kmeans_fit(X, cfg, max_workers=max_workers)
    curves = []
    for l, mu in enumerate(rd_model.denormalize(centroids, stats)):
        raw = rd_model.CentroidCurve(l, mu[:grid.s], mu[grid.s:])
        curves.append(rd_model.repair_monotonicity(raw))
    model = rd_model.ClusterModel(grid, stats, curves, seed=cfg.seed)
    return model, assign_all(X, model)
