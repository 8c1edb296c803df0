import pytest
import numpy as np
from rdalloc import synth_corpus
from rdalloc.synth_corpus import SynthConfig, ArchetypeParams
from rdalloc.errors import RDAllocError

def test_default_config():
    cfg = SynthConfig()
    assert cfg.n_chunks == 2000
    assert cfg.k_true == 10
    assert list(cfg.grid.points) == list(range(10, 59, 4))
    assert len(cfg.archetypes) == 10
    assert np.isclose(cfg.mixture.sum(), 1.0)

def test_archetype_curves_are_monotone():
    points = np.arange(10, 59, 4)
    for params in synth_corpus.DEFAULT_ARCHETYPES:
        rates, qualities = ArchetypeParams(*params).curves(points)
        assert np.all(np.diff(rates) < 0)
        assert np.all(np.diff(qualities) < 0)
        assert np.all(rates > 0)

def test_generate_is_deterministic():
    cfg = SynthConfig(n_chunks=50, k_true=4, feature_dim=5, seed=3)
    s1, f1, l1 = synth_corpus.generate(cfg)
    s2, f2, l2 = synth_corpus.generate(SynthConfig.from_dict(cfg.to_dict()))
    assert l1 == l2
    assert [s.chunk_id for s in s1] == ['chunk%05d' % i for i in range(50)]
    assert all(np.array_equal(a.rates, b.rates) and np.array_equal(a.qualities, b.qualities) for a, b in zip(s1, s2))
    assert all(np.array_equal(a.values, b.values) for a, b in zip(f1, f2))
    assert all(len(fv) == 5 for fv in f1)

def test_seed_changes_corpus():
    _, _, l1 = synth_corpus.generate(SynthConfig(n_chunks=60, k_true=4, seed=1))
    _, _, l2 = synth_corpus.generate(SynthConfig(n_chunks=60, k_true=4, seed=2))
    assert l1 != l2

def test_prefix_is_stable_when_corpus_grows():
    small = synth_corpus.generate(SynthConfig(n_chunks=10, k_true=3, seed=4))
    large = synth_corpus.generate(SynthConfig(n_chunks=30, k_true=3, seed=4))
    assert small[2] == large[2][:10]
    assert np.array_equal(small[0][9].rates, large[0][9].rates)

def test_mixture_is_respected():
    cfg = SynthConfig(n_chunks=400, k_true=3, mixture=[0.7, 0.3, 0.0], seed=0)
    _, _, labels = synth_corpus.generate(cfg)
    counts = np.bincount(labels, minlength=3)
    assert counts[2] == 0
    assert 0.6 < counts[0] / 400.0 < 0.8

def test_noiseless_chunks_follow_their_archetype():
    cfg = SynthConfig(n_chunks=20, k_true=3, rd_noise_rel=0.0, seed=5)
    samples, _, labels = synth_corpus.generate(cfg)
    for sample, label in zip(samples, labels):
        rates, qualities = cfg.archetypes[label].curves(cfg.grid.points)
        assert np.allclose(sample.rates, rates)
        assert np.allclose(sample.qualities, qualities)

def test_config_validation():
    with pytest.raises(RDAllocError):
        SynthConfig(k_true=11)
    with pytest.raises(RDAllocError):
        SynthConfig(k_true=2, mixture=[0.5, 0.6])
    with pytest.raises(RDAllocError):
        SynthConfig(rd_noise_rel=-0.1)
    with pytest.raises(RDAllocError):
        SynthConfig.from_dict({'n_chunks': 5, 'colour': 'red'})
    with pytest.raises(RDAllocError):
        ArchetypeParams(40, 0.2, -1, 0.05)
