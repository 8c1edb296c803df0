"""
Deterministic synthetic corpus: chunks drawn from parametric R-D archetypes

    quality(q) = a - b q        (dB)
    rate(q)    = c exp(-d q)    (kbps)

with per-chunk multiplicative log-normal noise on (a, b, c, d), and
complexity features that are a seeded affine embedding of the perturbed
parameters plus Gaussian noise.
"""
import logging
import numpy as np
from rdalloc.rd_model import OperatingPointGrid, RDSample
from rdalloc.classifier import FeatureVector
from rdalloc.errors import RDAllocError
from logutils.events import log_event

logger = logging.getLogger(__name__)

DEFAULT_GRID = tuple(range(10, 59, 4))

# loosely shaped after typical AV1 CRF behaviour across content types
DEFAULT_ARCHETYPES = (
    (48.0, 0.20, 6000.0, 0.055),
    (46.0, 0.28, 12000.0, 0.060),
    (44.0, 0.35, 20000.0, 0.065),
    (50.0, 0.15, 2500.0, 0.050),
    (42.0, 0.22, 30000.0, 0.070),
    (40.0, 0.30, 45000.0, 0.075),
    (47.0, 0.40, 9000.0, 0.045),
    (38.0, 0.18, 15000.0, 0.080),
    (45.0, 0.12, 4000.0, 0.085),
    (43.0, 0.45, 60000.0, 0.058),
)


class ArchetypeParams(object):
    def __init__(self, a, b, c, d):
        self.a, self.b, self.c, self.d = float(a), float(b), float(c), float(d)
        if not (self.b > 0 and self.c > 0 and self.d > 0):
            raise RDAllocError("archetype needs b, c, d > 0, got %r" % ((a, b, c, d),))

    def as_tuple(self):
        return (self.a, self.b, self.c, self.d)

    def curves(self, points):
        points = np.asarray(points, dtype=float)
        return self.c * np.exp(-self.d * points), self.a - self.b * points


class SynthConfig(object):
    def __init__(self, n_chunks=2000, k_true=10, grid=None, archetypes=None, mixture=None,
                 rd_noise_rel=0.03, feature_dim=22, feature_noise=2.0, seed=0):
        self.n_chunks = int(n_chunks)
        self.k_true = int(k_true)
        self.grid = grid if isinstance(grid, OperatingPointGrid) else OperatingPointGrid(grid or DEFAULT_GRID)
        if archetypes is None:
            if self.k_true > len(DEFAULT_ARCHETYPES):
                raise RDAllocError("only %d default archetypes, k_true=%d" % (len(DEFAULT_ARCHETYPES), self.k_true))
            archetypes = DEFAULT_ARCHETYPES[:self.k_true]
        self.archetypes = [a if isinstance(a, ArchetypeParams) else ArchetypeParams(*a) for a in archetypes]
        if mixture is None:
            mixture = np.full(self.k_true, 1.0 / self.k_true)
        self.mixture = np.asarray(mixture, dtype=float)
        self.rd_noise_rel = float(rd_noise_rel)
        self.feature_dim = int(feature_dim)
        self.feature_noise = float(feature_noise)
        self.seed = int(seed)
        self.validate()

    def validate(self):
        if self.n_chunks < 1 or self.k_true < 1 or self.feature_dim < 1:
            raise RDAllocError("n_chunks, k_true and feature_dim must be positive")
        if len(self.archetypes) != self.k_true:
            raise RDAllocError("%d archetypes for k_true=%d" % (len(self.archetypes), self.k_true))
        if len(self.mixture) != self.k_true or np.any(self.mixture < 0) or abs(self.mixture.sum() - 1) > 1e-9:
            raise RDAllocError("mixture must be %d non-negative probabilities summing to 1" % self.k_true)
        if self.rd_noise_rel < 0 or self.feature_noise < 0:
            raise RDAllocError("noise levels must be non-negative")
        if not 0 <= self.seed < 2 ** 64:
            raise RDAllocError("seed must be a 64-bit unsigned integer")

    @classmethod
    def from_dict(cls, d):
        known = ('n_chunks', 'k_true', 'grid', 'archetypes', 'mixture', 'rd_noise_rel', 'feature_dim',
                 'feature_noise', 'seed')
        unknown = set(d) - set(known)
        if unknown:
            raise RDAllocError("unknown synthetic config keys: %s" % ', '.join(sorted(unknown)))
        return cls(**d)

    def to_dict(self):
        return dict(n_chunks=self.n_chunks, k_true=self.k_true, grid=[float(p) for p in self.grid.points],
                    archetypes=[list(a.as_tuple()) for a in self.archetypes],
                    mixture=[float(m) for m in self.mixture], rd_noise_rel=self.rd_noise_rel,
                    feature_dim=self.feature_dim, feature_noise=self.feature_noise, seed=self.seed)


def _embedding(cfg):
    """Seeded affine map from standardized (a, b, log c, d) to feature space."""
    rng = np.random.default_rng([cfg.seed, 0])
    projection = rng.standard_normal((cfg.feature_dim, 4))
    offset = rng.standard_normal(cfg.feature_dim)
    base = np.array([[a.a, a.b, np.log(a.c), a.d] for a in cfg.archetypes])
    center = base.mean(axis=0)
    spread = base.std(axis=0)
    spread[spread <= 0] = 1.0
    return projection, offset, center, spread


def generate(cfg):
    """(samples, features, true labels); chunk i draws from rng seeded by (seed, 1, i)."""
    cfg.validate()
    projection, offset, center, spread = _embedding(cfg)
    cumulative = np.cumsum(cfg.mixture)
    cumulative[-1] = 1.0
    samples, features, labels = [], [], []
    for i in range(cfg.n_chunks):
        rng = np.random.default_rng([cfg.seed, 1, i])
        label = int(np.searchsorted(cumulative, rng.random(), side='right'))
        label = min(label, cfg.k_true - 1)
        a, b, c, d = np.array(cfg.archetypes[label].as_tuple()) * np.exp(cfg.rd_noise_rel * rng.standard_normal(4))
        params = ArchetypeParams(a, b, c, d)
        rates, qualities = params.curves(cfg.grid.points)
        chunk_id = 'chunk%05d' % i
        samples.append(RDSample(chunk_id, rates, qualities, cfg.grid))
        z = (np.array([a, b, np.log(c), d]) - center) / spread
        values = projection.dot(z) + offset + cfg.feature_noise * rng.standard_normal(cfg.feature_dim)
        features.append(FeatureVector(chunk_id, values))
        labels.append(label)
    log_event('synth', 'generated', chunks=cfg.n_chunks, k_true=cfg.k_true)
    return samples, features, labels
