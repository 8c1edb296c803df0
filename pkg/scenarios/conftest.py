import pytest
import numpy as np
from rdalloc import synth_corpus
from rdalloc.rd_model import OperatingPointGrid, NormalizationStats, CentroidCurve, ClusterModel

def pytest_addoption(parser):
    # called by pytest to add command line options
    parser.addoption('--slow', action='store_true',
                     help="Also run acceptance-size corpora (minutes)")

def pytest_collection_modifyitems(config, items):
    if config.getoption('--slow'):
        return
    skip = pytest.mark.skip(reason="needs --slow")
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip)

@pytest.fixture(scope='module')
def slow(request):
    """
    Fixture for the --slow command line option (true if --slow is set,
    false otherwise).
    """
    return request.config.getoption('--slow')

@pytest.fixture(scope='module')
def small_corpus():
    """Three well separated archetypes, 90 chunks, low feature noise."""
    cfg = synth_corpus.SynthConfig(n_chunks=90, k_true=3, feature_dim=6, feature_noise=0.2, seed=7,
                                   archetypes=synth_corpus.DEFAULT_ARCHETYPES[3:6])
    samples, features, labels = synth_corpus.generate(cfg)
    return cfg, samples, features, labels

def make_model(rates, qualities, points=None):
    """ClusterModel straight from k x s rate / quality tables."""
    rates = np.asarray(rates, dtype=float)
    qualities = np.asarray(qualities, dtype=float)
    k, s = rates.shape
    grid = OperatingPointGrid(points if points is not None else range(s))
    stats = NormalizationStats(np.zeros(2 * s), np.ones(2 * s))
    curves = [CentroidCurve(l, rates[l], qualities[l]) for l in range(k)]
    return ClusterModel(grid, stats, curves)

def random_curves(rng, k, s):
    """Archetype-like monotone curves: exponential rate, linear quality with jitter."""
    q = np.arange(s, dtype=float)
    rates = np.empty((k, s))
    qualities = np.empty((k, s))
    for l in range(k):
        c = rng.uniform(500, 20000)
        d = rng.uniform(0.1, 0.6)
        a = rng.uniform(35, 50)
        b = rng.uniform(0.5, 3.0)
        rates[l] = c * np.exp(-d * q) * np.cumprod(np.r_[1.0, rng.uniform(0.9, 1.0, s - 1)])
        qualities[l] = a - b * q - np.cumsum(np.r_[0.0, rng.uniform(0.0, 0.5, s - 1)])
    return rates, qualities

@pytest.fixture
def curve_factory():
    return random_curves

@pytest.fixture
def model_factory():
    return make_model
