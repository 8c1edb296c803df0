"""
Operating-point grids, per-chunk R-D samples, normalization and centroid
R-D curves.

Quality (PSNR, dB, higher is better) stands in for distortion everywhere.
All objects are immutable once built.
"""
import numpy as np
from sklearn.isotonic import isotonic_regression
from rdalloc.errors import IngestionError, ShapeError

EPSILON_STD = 1e-8
MONOTONE_RTOL = 1e-6


def _frozen(values):
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


def _is_non_increasing(values, rtol=MONOTONE_RTOL):
    values = np.asarray(values, dtype=float)
    if len(values) < 2:
        return True
    scale = np.maximum(np.abs(values[:-1]), np.abs(values[1:]))
    return bool(np.all(np.diff(values) <= rtol * scale))


class OperatingPointGrid(object):
    """Strictly increasing encoder operating points (CRF/QP values)."""

    def __init__(self, points):
        points = _frozen(points)
        if points.ndim != 1 or len(points) < 2:
            raise IngestionError("operating-point grid needs at least 2 points, got %d" % points.size)
        if not np.all(np.isfinite(points)):
            raise IngestionError("operating-point grid has non-finite values")
        if not np.all(np.diff(points) > 0):
            raise IngestionError("operating-point grid must be strictly increasing: %s" % list(points))
        self.points = points

    @property
    def s(self):
        return len(self.points)

    def index_of(self, q):
        hits = np.flatnonzero(np.isclose(self.points, q, rtol=0, atol=1e-9))
        if not len(hits):
            raise ShapeError("operating point %r is not on the grid %s" % (q, list(self.points)))
        return int(hits[0])

    def __len__(self):
        return self.s

    def __eq__(self, other):
        return isinstance(other, OperatingPointGrid) and np.array_equal(self.points, other.points)

    def __ne__(self, other):
        return not self == other

    def __repr__(self):
        return "OperatingPointGrid(%s)" % list(self.points)


class RDSample(object):
    """
    One chunk's measured rates (kbps) and qualities (dB) at every grid point.
    Non-monotone measurements are rejected, never repaired.
    """

    def __init__(self, chunk_id, rates, qualities, grid=None):
        self.chunk_id = str(chunk_id)
        self.rates = _frozen(rates)
        self.qualities = _frozen(qualities)
        if self.rates.shape != self.qualities.shape or self.rates.ndim != 1:
            raise IngestionError("chunk %s: rates and qualities differ in length" % self.chunk_id)
        if grid is not None and len(self.rates) != grid.s:
            raise IngestionError("chunk %s: %d points, grid has %d" % (self.chunk_id, len(self.rates), grid.s))
        if not (np.all(np.isfinite(self.rates)) and np.all(np.isfinite(self.qualities))):
            raise IngestionError("chunk %s: non-finite values" % self.chunk_id)
        if not np.all(self.rates > 0):
            raise IngestionError("chunk %s: rates must be strictly positive" % self.chunk_id)
        if not _is_non_increasing(self.rates):
            raise IngestionError("chunk %s: rates increase with the operating point" % self.chunk_id)
        if not _is_non_increasing(self.qualities):
            raise IngestionError("chunk %s: qualities increase with the operating point" % self.chunk_id)

    @property
    def s(self):
        return len(self.rates)

    def __repr__(self):
        return "RDSample(%r, s=%d)" % (self.chunk_id, self.s)


class NormalizationStats(object):
    def __init__(self, means, stds):
        self.means = _frozen(means)
        self.stds = _frozen(stds)
        if self.means.shape != self.stds.shape:
            raise ShapeError("means and stds differ in length")
        if not (np.all(np.isfinite(self.means)) and np.all(np.isfinite(self.stds))):
            raise ShapeError("normalization statistics must be finite")
        if np.any(self.stds < EPSILON_STD):
            raise ShapeError("standard deviations below %g" % EPSILON_STD)

    def __len__(self):
        return len(self.means)


class CentroidCurve(object):
    def __init__(self, cluster_id, rates, qualities):
        self.cluster_id = int(cluster_id)
        self.rates = _frozen(rates)
        self.qualities = _frozen(qualities)
        if self.rates.shape != self.qualities.shape:
            raise ShapeError("centroid %d: rates and qualities differ in length" % self.cluster_id)

    def is_monotone(self):
        return _is_non_increasing(self.rates, 0) and _is_non_increasing(self.qualities, 0)

    def __repr__(self):
        return "CentroidCurve(%d, rates=%s, qualities=%s)" % (
            self.cluster_id, list(self.rates), list(self.qualities))


class ClusterModel(object):
    """
    Normalization statistics plus k denormalized centroid curves over a grid.
    """

    def __init__(self, grid, stats, centroids, seed=None):
        centroids = sorted(centroids, key=lambda c: c.cluster_id)
        if not centroids:
            raise ShapeError("a cluster model needs at least one centroid")
        if [c.cluster_id for c in centroids] != list(range(len(centroids))):
            raise ShapeError("centroid ids must be 0..k-1")
        if len(stats) != 2 * grid.s:
            raise ShapeError("statistics have %d components, grid needs %d" % (len(stats), 2 * grid.s))
        for c in centroids:
            if len(c.rates) != grid.s:
                raise ShapeError("centroid %d does not match the grid" % c.cluster_id)
        self.grid = grid
        self.stats = stats
        self.centroids = tuple(centroids)
        self.seed = seed
        self.rates = _frozen([c.rates for c in centroids])
        self.qualities = _frozen([c.qualities for c in centroids])
        self.normalized_centroids = _frozen([normalize(curve_vector(c), stats) for c in centroids])

    @property
    def k(self):
        return len(self.centroids)


def to_rd_vector(sample, grid=None):
    """[r_1..r_s, d_1..d_s] for one chunk."""
    if grid is not None and sample.s != grid.s:
        raise IngestionError("chunk %s: %d points, grid has %d" % (sample.chunk_id, sample.s, grid.s))
    return np.concatenate([sample.rates, sample.qualities])


def from_rd_vector(chunk_id, vector, grid):
    vector = np.asarray(vector, dtype=float)
    if vector.shape != (2 * grid.s,):
        raise ShapeError("vector of length %d does not match grid of %d points" % (vector.size, grid.s))
    return RDSample(chunk_id, vector[:grid.s], vector[grid.s:], grid)


def curve_vector(curve):
    return np.concatenate([curve.rates, curve.qualities])


def rd_matrix(samples, grid=None):
    if not samples:
        raise IngestionError("no R-D samples")
    return np.vstack([to_rd_vector(s, grid) for s in samples])


def fit_normalization(samples):
    """
    Per-component sample mean and sample std (n-1 divisor); stds below
    EPSILON_STD are clamped.
    """
    if len(samples) < 2:
        raise IngestionError("normalization needs at least 2 samples, got %d" % len(samples))
    X = rd_matrix(samples) if isinstance(samples[0], RDSample) else np.asarray(samples, dtype=float)
    means = X.mean(axis=0)
    stds = np.maximum(X.std(axis=0, ddof=1), EPSILON_STD)
    return NormalizationStats(means, stds)


def normalize(v, stats):
    v = np.asarray(v, dtype=float)
    if v.shape[-1] != len(stats):
        raise ShapeError("vector of length %d, statistics have %d" % (v.shape[-1], len(stats)))
    return (v - stats.means) / stats.stds


def denormalize(v, stats):
    v = np.asarray(v, dtype=float)
    if v.shape[-1] != len(stats):
        raise ShapeError("vector of length %d, statistics have %d" % (v.shape[-1], len(stats)))
    return v * stats.stds + stats.means


def repair_monotonicity(curve):
    """
    Least-squares non-increasing fit (pool-adjacent-violators) of both rates
    and qualities.
    """
    rates = isotonic_regression(np.asarray(curve.rates, dtype=float), increasing=False)
    qualities = isotonic_regression(np.asarray(curve.qualities, dtype=float), increasing=False)
    return CentroidCurve(curve.cluster_id, rates, qualities)


def interpolate_curve(curve, q, grid):
    """Piecewise-linear (rate, quality) at operating point q; no extrapolation."""
    points = grid.points
    if not points[0] <= q <= points[-1]:
        raise ShapeError("operating point %r outside grid range [%g, %g]" % (q, points[0], points[-1]))
    return float(np.interp(q, points, curve.rates)), float(np.interp(q, points, curve.qualities))
