import pytest
import numpy as np
from rdalloc import evaluation, classifier, clustering, allocation, synth_corpus
from rdalloc.evaluation import Sweep, SweepPoint
from rdalloc.allocation import CorpusDistribution, QualityConstraints
from rdalloc.svm import SvmHyperparams
from rdalloc.errors import RDAllocError

def analytic_sweep(kind, offset=0.0, n=6):
    """log10(rate) linear in quality, shifted by `offset` decades."""
    q = np.linspace(30.0, 45.0, n)
    rates = 10.0 ** (1.0 + 0.08 * q + offset)
    return Sweep(kind, [SweepPoint('%d' % i, r, qq, qq - 2) for i, (r, qq) in enumerate(zip(rates, q))])

def two_group_corpus(n_chunks, seed, rd_noise_rel=0.02):
    archetypes = [(46.0, 0.10, 8000.0, 0.06), (46.0, 0.50, 8000.0, 0.06)]
    cfg = synth_corpus.SynthConfig(n_chunks=n_chunks, k_true=2, archetypes=archetypes, feature_dim=4,
                                   feature_noise=0.2, rd_noise_rel=rd_noise_rel, seed=seed)
    return cfg, synth_corpus.generate(cfg)

def test_sweep_sorted_and_checked():
    sweep = Sweep('baseline_expected', [SweepPoint('a', 300., 40., 38.), SweepPoint('b', 100., 35., 33.)])
    assert [p.label for p in sweep.points] == ['b', 'a']
    with pytest.raises(RDAllocError):
        sweep.check_bd_eligible()
    with pytest.raises(ValueError):
        Sweep('nonsense', [])
    with pytest.raises(RDAllocError):
        Sweep('baseline_expected', [SweepPoint('a', float('nan'), 40., 38.)])

def test_sweep_rejects_quality_not_rising_with_rate():
    with pytest.raises(RDAllocError):
        Sweep('baseline_expected', [SweepPoint('a', 300., 35., 33.), SweepPoint('b', 100., 40., 38.)])
    with pytest.raises(RDAllocError):
        Sweep('baseline_expected', [SweepPoint('a', 300., 40., 33.), SweepPoint('b', 100., 40., 38.)])

def test_bd_rate_closed_form():
    ref = analytic_sweep('baseline_expected')
    test = analytic_sweep('optimal_expected', offset=np.log10(0.8))
    assert abs(evaluation.bd_rate(ref, test) - (-20.0)) < 0.1
    # equal-rate gain: shift of 0.0969 decades over slope 0.08 dB^-1
    assert np.isclose(evaluation.bd_quality(ref, test), -np.log10(0.8) / 0.08, atol=1e-6)

def test_bd_rate_identical_sweeps():
    ref = analytic_sweep('baseline_expected')
    assert evaluation.bd_rate(ref, analytic_sweep('optimal_expected')) == 0.0
    assert evaluation.bd_quality(ref, analytic_sweep('optimal_expected')) == 0.0

def test_bd_rate_needs_overlap_and_points():
    ref = analytic_sweep('baseline_expected')
    far = Sweep('optimal_expected', [SweepPoint(p.label, p.avg_rate, p.avg_quality + 20, p.worst_quality)
                                     for p in ref.points])
    with pytest.raises(RDAllocError):
        evaluation.bd_rate(ref, far)
    with pytest.raises(RDAllocError):
        evaluation.bd_rate(ref, analytic_sweep('optimal_expected', n=3))

def test_expected_sweeps_on_hand_model(model_factory):
    model = model_factory([[1000., 500., 250., 120.], [3000., 1500., 700., 400.]],
                          [[40., 37., 34., 31.], [42., 38., 33., 30.]], [20, 30, 40, 50])
    w = CorpusDistribution([0.5, 0.5])
    baseline = evaluation.baseline_sweep_expected(model, w, [20, 30, 40, 50])
    assert [p.label for p in baseline.points] == ['50.0', '40.0', '30.0', '20.0']
    assert baseline.points[1] == SweepPoint('40.0', 475.0, 33.5, 33.0, 40.0)
    optimal = evaluation.optimal_sweep_expected(model, w, baseline)
    assert len(optimal.solutions) == len(optimal.points)
    for b, o, sol in zip(baseline.points, optimal.points, optimal.solutions):
        assert o.label == b.label
        assert o.avg_rate <= b.avg_rate
        assert o.avg_quality >= b.avg_quality - 1e-9
        assert o.worst_quality >= b.worst_quality - 1e-9
        assert sol.avg_rate == o.avg_rate

def test_single_cluster_gains_nothing(model_factory):
    model = model_factory([[1000., 500., 250., 120., 60.]], [[40., 37., 34., 31., 28.]])
    w = CorpusDistribution([1.0])
    baseline = evaluation.baseline_sweep_expected(model, w, range(5))
    optimal = evaluation.optimal_sweep_expected(model, w, baseline)
    assert [p.avg_rate for p in optimal.points] == [p.avg_rate for p in baseline.points]
    assert evaluation.bd_rate(baseline, optimal) == 0.0

def test_heterogeneous_corpus_saves_rate():
    cfg, (samples, _, _) = two_group_corpus(120, seed=5)
    model, labels = clustering.cluster_samples(samples, clustering.KMeansConfig(k=2, n_init=3), cfg.grid)
    w = allocation.estimate_weights(labels, 2)
    baseline = evaluation.baseline_sweep_expected(model, w, cfg.grid.points)
    optimal = evaluation.optimal_sweep_expected(model, w, baseline)
    assert evaluation.bd_rate(baseline, optimal) < -10.0
    entry = evaluation.compare('optimal_expected_vs_baseline_expected', baseline, optimal)
    assert entry['pair'] == 'optimal_expected_vs_baseline_expected'
    assert entry['bd_rate_percent'] < -10.0
    assert entry['bd_quality_db'] > 0.0

def test_identical_archetypes_save_nothing():
    archetypes = [(46.0, 0.30, 8000.0, 0.06)] * 2
    cfg = synth_corpus.SynthConfig(n_chunks=40, k_true=2, archetypes=archetypes, rd_noise_rel=0.0, seed=1)
    samples, _, _ = synth_corpus.generate(cfg)
    model, labels = clustering.cluster_samples(samples, clustering.KMeansConfig(k=2, n_init=2), cfg.grid)
    w = allocation.estimate_weights(labels, 2)
    baseline = evaluation.baseline_sweep_expected(model, w, cfg.grid.points)
    optimal = evaluation.optimal_sweep_expected(model, w, baseline)
    assert abs(evaluation.bd_rate(baseline, optimal)) <= 0.5

def test_fractional_grid_points_survive_labelling(model_factory):
    points = np.linspace(10.0, 20.0, 7)
    steps = np.arange(7)
    model = model_factory([2000. * 0.7 ** steps, 6000. * 0.6 ** steps],
                          [44. - 1.5 * steps, 47. - 2.5 * steps], points)
    w = CorpusDistribution([0.4, 0.6])
    baseline = evaluation.baseline_sweep_expected(model, w, points)
    assert sorted(p.q for p in baseline.points) == list(points)
    assert all(p.label == repr(p.q) for p in baseline.points)
    optimal = evaluation.optimal_sweep_expected(model, w, baseline)
    assert [p.q for p in optimal.points] == [p.q for p in baseline.points]
    for b, o in zip(baseline.points, optimal.points):
        assert o.avg_rate <= b.avg_rate * (1 + 1e-9)

def test_perfect_classifier_matches_the_expected_sweeps():
    cfg, (samples, _, _) = two_group_corpus(60, seed=4, rd_noise_rel=0.0)
    model, labels = clustering.cluster_samples(samples, clustering.KMeansConfig(k=2, n_init=2), cfg.grid)
    w = allocation.estimate_weights(labels, 2)
    ladder = cfg.grid.points[::2]
    baseline = evaluation.baseline_sweep_expected(model, w, ladder)
    optimal = evaluation.optimal_sweep_expected(model, w, baseline)
    # noiseless chunks sit exactly on their centroid, so measured equals expected
    base, opt = evaluation.actual_sweeps(samples, None, None, model, optimal.solutions,
                                         [p.q for p in optimal.points], labels)
    assert np.allclose(base.rates(), baseline.rates())
    assert np.allclose(base.qualities(), baseline.qualities())
    assert np.allclose(opt.rates(), optimal.rates())
    assert np.allclose(opt.qualities(), optimal.qualities())

def test_savings_survive_twenty_percent_label_noise():
    cfg, (samples, features, _) = two_group_corpus(200, seed=11)
    model, labels = clustering.cluster_samples(samples, clustering.KMeansConfig(k=4, n_init=3), cfg.grid)
    w = allocation.estimate_weights(labels, 4)
    ladder = [10.0, 18.0, 26.0, 34.0, 42.0]
    baseline = evaluation.baseline_sweep_expected(model, w, ladder)
    optimal = evaluation.optimal_sweep_expected(model, w, baseline)
    noisy = classifier.inject_label_noise(labels, 0.2, 4, seed=2)
    assert np.mean(noisy != labels) == pytest.approx(0.2, abs=0.01)
    base, opt = evaluation.actual_sweeps(samples, features, None, model, optimal.solutions,
                                         [p.q for p in optimal.points], noisy)
    assert evaluation.bd_rate(base, opt) < 0.0

@pytest.fixture(scope='module')
def actual_setup():
    cfg, (samples, features, true_labels) = two_group_corpus(80, seed=9)
    model, labels = clustering.cluster_samples(samples, clustering.KMeansConfig(k=2, n_init=3), cfg.grid)
    svm_model = classifier.train_classifier(np.vstack([fv.values for fv in features]), labels,
                                            SvmHyperparams(1.0, 0.5))
    w = allocation.estimate_weights(svm_model.predict_many(np.vstack([fv.values for fv in features])), 2)
    baseline = evaluation.baseline_sweep_expected(model, w, cfg.grid.points)
    optimal = evaluation.optimal_sweep_expected(model, w, baseline)
    ladder = [p.q for p in optimal.points]
    return cfg, samples, features, svm_model, model, optimal, ladder

def test_actual_sweeps(actual_setup):
    cfg, samples, features, svm_model, model, optimal, ladder = actual_setup
    base, opt = evaluation.actual_sweeps(samples, features, svm_model, model, optimal.solutions, ladder)
    assert base.kind == 'baseline_actual' and opt.kind == 'optimal_actual'
    assert len(base) == len(opt) == cfg.grid.s
    j = cfg.grid.index_of(30.0)
    point = [p for p in base.points if p.q == 30.0][0]
    assert np.isclose(point.avg_rate, np.mean([s.rates[j] for s in samples]))
    assert np.isclose(point.worst_quality, min(s.qualities[j] for s in samples))
    assert evaluation.bd_rate(base, opt) < 0.0

def test_actual_sweeps_survive_label_noise(actual_setup):
    cfg, samples, features, svm_model, model, optimal, ladder = actual_setup
    predictions = evaluation.predict_chunks(samples, features, svm_model)
    noisy = classifier.inject_label_noise(predictions, 0.1, 2, seed=3)
    base, opt = evaluation.actual_sweeps(samples, features, svm_model, model, optimal.solutions, ladder, noisy)
    assert evaluation.bd_rate(base, opt) < 0.0

def test_predict_chunks_needs_every_feature(actual_setup):
    _, samples, features, svm_model, _, _, _ = actual_setup
    with pytest.raises(RDAllocError):
        evaluation.predict_chunks(samples, features[1:], svm_model)

def test_oracle_dominates_cluster_allocation(actual_setup):
    cfg, samples, features, svm_model, model, optimal, ladder = actual_setup
    base, opt = evaluation.actual_sweeps(samples, features, svm_model, model, optimal.solutions, ladder)
    oracle = evaluation.oracle_sweep(samples, base, cfg.grid)
    assert oracle.kind == 'oracle_actual'
    by_label = dict((p.label, p) for p in oracle.points)
    for p in base.points:
        assert by_label[p.label].avg_rate <= p.avg_rate * (1 + 1e-9)
    # at the cluster allocation's own average quality the oracle is never dearer
    predictions = evaluation.predict_chunks(samples, features, svm_model)
    floor = min(float(s.qualities.min()) for s in samples) - 1.0
    for p, sol in zip(opt.points, opt.solutions):
        per_chunk = np.asarray(sol.op_index)[predictions]
        best = allocation.per_chunk_allocation(samples, QualityConstraints(p.avg_quality, floor), cfg.grid,
                                               incumbent=per_chunk)
        assert best.avg_rate <= p.avg_rate * (1 + 1e-6)
    unconstrained = evaluation.oracle_sweep(samples, base, cfg.grid, worst_constraint=False)
    assert evaluation.bd_quality(opt, unconstrained) > -0.05

def test_half_rate_is_minus_fifty_percent():
    ref = analytic_sweep('baseline_expected')
    half = Sweep('optimal_expected', [p._replace(avg_rate=p.avg_rate / 2) for p in ref.points])
    assert np.isclose(evaluation.bd_rate(ref, half), -50.0)

def test_bd_rate_is_nearly_antisymmetric():
    ref = analytic_sweep('baseline_expected')
    bent = Sweep('optimal_expected', [p._replace(avg_rate=p.avg_rate * (0.7 + 0.01 * i))
                                      for i, p in enumerate(ref.points)])
    forward = evaluation.bd_rate(ref, bent)
    backward = evaluation.bd_rate(bent, ref)
    assert abs((1 + forward / 100) * (1 + backward / 100) - 1) < 0.005

@pytest.mark.slow
def test_savings_persist_under_twenty_percent_label_noise():
    cfg = synth_corpus.SynthConfig(n_chunks=2000, k_true=10, seed=0)
    samples, features, _ = synth_corpus.generate(cfg)
    model, labels = clustering.cluster_samples(samples, clustering.KMeansConfig(k=10, n_init=3), cfg.grid)
    X = np.vstack([fv.values for fv in features])
    svm_model = classifier.train_classifier(X, labels, SvmHyperparams(1.0, 0.05))
    predictions = evaluation.predict_chunks(samples, features, svm_model)
    w = allocation.estimate_weights(predictions, 10)
    baseline = evaluation.baseline_sweep_expected(model, w, cfg.grid.points)
    optimal = evaluation.optimal_sweep_expected(model, w, baseline)
    ladder = [p.q for p in optimal.points]
    noisy = classifier.inject_label_noise(predictions, 0.2, 10, seed=1)
    # every other grid point keeps the sweeps strictly increasing
    base, opt = evaluation.actual_sweeps(samples, features, svm_model, model, optimal.solutions[::2], ladder[::2],
                                         noisy)
    assert evaluation.bd_rate(base, opt) < 0.0
