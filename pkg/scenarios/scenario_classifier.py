import pytest
import numpy as np
from rdalloc import classifier, synth_corpus
from rdalloc.classifier import FeatureVector, FeatureScaler, ClassifierModel
from rdalloc.svm import SvmHyperparams, BinaryMachine
from rdalloc.errors import RDAllocError, ShapeError

def clusters(n_per=20, centers=((5., 0.), (-5., 0.), (0., 6.)), spread=0.4, seed=0):
    rng = np.random.default_rng(seed)
    X = np.vstack([rng.normal(c, spread, size=(n_per, 2)) for c in centers])
    y = np.repeat(np.arange(len(centers)), n_per)
    return X, y

def as_dataset(X, y):
    return [(FeatureVector('chunk%05d' % i, x), int(label)) for i, (x, label) in enumerate(zip(X, y))]

def constant_machine(bias, a, b):
    return BinaryMachine([[0., 0.]], [0.0], bias, 1.0, positive=a, negative=b)

def test_scaler_uses_sample_std_and_clamps():
    X = np.array([[1., 5.], [3., 5.]])
    scaler = FeatureScaler.fit(X)
    assert np.allclose(scaler.means, [2., 5.])
    assert np.isclose(scaler.stds[0], np.sqrt(2.0))
    assert scaler.stds[1] > 0
    assert np.allclose(scaler.transform(X)[:, 1], 0.0)
    with pytest.raises(ShapeError):
        scaler.transform(np.zeros((1, 3)))

def test_feature_vector_must_be_finite():
    with pytest.raises(RDAllocError):
        FeatureVector('c', [1.0, float('nan')])

def test_one_vs_one_on_separated_clusters():
    X, y = clusters()
    model = classifier.train_classifier(X, y, SvmHyperparams(1.0, 0.5), max_workers=2)
    assert model.classes == [0, 1, 2]
    assert sorted(model.machines) == [(0, 1), (0, 2), (1, 2)]
    assert np.array_equal(model.predict_many(X), y)
    assert classifier.predict(model, FeatureVector('x', X[0])) == y[0]
    with pytest.raises(ShapeError):
        model.predict_many(np.zeros((1, 3)))

def test_vote_tie_goes_to_strongest_then_lowest():
    scaler = FeatureScaler([0., 0.], [1., 1.])
    hp = SvmHyperparams(1, 1)
    # every class wins exactly one vote
    machines = {(0, 1): constant_machine(0.5, 0, 1),
                (0, 2): constant_machine(-2.0, 0, 2),
                (1, 2): constant_machine(1.0, 1, 2)}
    model = ClassifierModel(scaler, [0, 1, 2], machines, hp)
    assert model.predict([0., 0.]) == 2
    machines = {(0, 1): constant_machine(1.0, 0, 1),
                (0, 2): constant_machine(-1.0, 0, 2),
                (1, 2): constant_machine(1.0, 1, 2)}
    model = ClassifierModel(scaler, [0, 1, 2], machines, hp)
    assert model.predict([0., 0.]) == 0

def test_model_needs_every_pair():
    scaler = FeatureScaler([0., 0.], [1., 1.])
    with pytest.raises(RDAllocError):
        ClassifierModel(scaler, [0, 1, 2], {(0, 1): constant_machine(1.0, 0, 1)}, SvmHyperparams(1, 1))

def test_split_is_stratified_and_deterministic():
    X, y = clusters(n_per=10)
    dataset = as_dataset(X, y)
    train, test = classifier.split_train_test(dataset, 0.8, seed=3)
    assert len(train) == 24 and len(test) == 6
    assert sorted(label for _, label in test) == [0, 0, 1, 1, 2, 2]
    ids = [fv.chunk_id for fv, _ in train + test]
    assert sorted(ids) == sorted(fv.chunk_id for fv, _ in dataset)
    assert [fv.chunk_id for fv, _ in train] == sorted(fv.chunk_id for fv, _ in train)
    again, _ = classifier.split_train_test(dataset, 0.8, seed=3)
    assert [fv.chunk_id for fv, _ in again] == [fv.chunk_id for fv, _ in train]

def test_split_rejects_singleton_class():
    X, y = clusters(n_per=4)
    dataset = as_dataset(X, y)[:9]
    with pytest.raises(RDAllocError):
        classifier.split_train_test(dataset, 0.5, seed=0)
    with pytest.raises(ValueError):
        classifier.split_train_test(as_dataset(X, y), 1.0, seed=0)

def test_fold_indices():
    y = np.repeat([0, 1], 6)
    folds = classifier.fold_indices(y, 3, seed=1)
    assert len(folds) == 3
    for train_idx, val_idx in folds:
        assert sorted(y[val_idx]) == [0, 0, 1, 1]
        assert not set(train_idx) & set(val_idx)
    loo = classifier.fold_indices(y, len(y), seed=1)
    assert len(loo) == len(y)
    assert all(len(val) == 1 for _, val in loo)
    with pytest.raises(RDAllocError):
        classifier.fold_indices(np.r_[y, 2], 3, seed=1)

def test_grid_search_prefers_smaller_cells_on_ties():
    X, y = clusters(n_per=12, spread=0.3)
    report = classifier.grid_search_cv(as_dataset(X, y), c_grid=(10.0, 1.0), gamma_grid=(1.0, 0.1), folds=3, seed=0)
    assert [(c, g) for c, g, _ in report.cv_grid] == [(1.0, 0.1), (1.0, 1.0), (10.0, 0.1), (10.0, 1.0)]
    assert all(acc == 1.0 for _, _, acc in report.cv_grid)
    assert report.best == SvmHyperparams(1.0, 0.1)
    assert report.best_accuracy == 1.0

def test_confusion_matrix_and_evaluate():
    matrix = classifier.confusion_matrix([0, 0, 1, 2], [0, 1, 1, 2], 3)
    assert matrix.tolist() == [[1, 1, 0], [0, 1, 0], [0, 0, 1]]
    X, y = clusters()
    model = classifier.train_classifier(X, y, SvmHyperparams(1.0, 0.5))
    acc, matrix = classifier.evaluate(model, as_dataset(X, y), k=4)
    assert acc == 1.0
    assert matrix.shape == (4, 4)
    assert np.array_equal(np.diag(matrix)[:3], [20, 20, 20])

def test_train_and_report_on_noiseless_corpus():
    cfg = synth_corpus.SynthConfig(n_chunks=90, k_true=3, feature_dim=6, feature_noise=0.0, rd_noise_rel=0.0, seed=7,
                                   archetypes=synth_corpus.DEFAULT_ARCHETYPES[3:6])
    _, features, labels = synth_corpus.generate(cfg)
    dataset = list(zip(features, labels))
    model, report = classifier.train_and_report(dataset, ratio=0.7, folds=3, seed=1, c_grid=(1.0, 10.0),
                                                gamma_grid=(0.1, 1.0), k=3)
    assert report.train_count + report.test_count == len(dataset)
    assert report.test_accuracy == 1.0
    assert len(report.cv_grid) == 4
    assert report.confusion_matrix.sum() == report.test_count
    assert model.hyperparams == report.best

def test_train_and_report_on_noisy_features(small_corpus):
    _, _, features, labels = small_corpus
    _, report = classifier.train_and_report(list(zip(features, labels)), ratio=0.7, folds=3, seed=1,
                                            c_grid=(1.0, 10.0), gamma_grid=(0.1, 1.0), k=3)
    assert report.test_accuracy > 0.8

def test_label_noise():
    labels = np.repeat(np.arange(5), 20)
    assert np.array_equal(classifier.inject_label_noise(labels, 0.0, 5, seed=0), labels)
    noisy = classifier.inject_label_noise(labels, 0.2, 5, seed=0)
    assert np.sum(noisy != labels) == 20
    assert noisy.min() >= 0 and noisy.max() < 5
    assert np.array_equal(noisy, classifier.inject_label_noise(labels, 0.2, 5, seed=0))
    assert np.all(classifier.inject_label_noise(labels, 1.0, 5, seed=3) != labels)
    with pytest.raises(ValueError):
        classifier.inject_label_noise(labels, 1.5, 5, seed=0)

def test_project_pca():
    X, _ = clusters()
    projected = classifier.project_pca(X)
    assert projected.shape == (len(X), 2)
    variances = projected.var(axis=0)
    assert variances[0] >= variances[1]
    assert np.allclose(projected.mean(axis=0), 0.0)

def default_corpus_split(feature_noise):
    cfg = synth_corpus.SynthConfig(n_chunks=1000, k_true=10, feature_noise=feature_noise, seed=0)
    _, features, labels = synth_corpus.generate(cfg)
    return classifier.split_train_test(list(zip(features, labels)), 0.8, seed=0)

@pytest.mark.slow
def test_noiseless_default_corpus_is_learned_exactly():
    train, test = default_corpus_split(0.0)
    X = np.vstack([fv.values for fv, _ in train])
    model = classifier.train_classifier(X, [label for _, label in train], SvmHyperparams(10.0, 0.05))
    acc, _ = classifier.evaluate(model, test, k=10)
    assert acc == 1.0

@pytest.mark.slow
def test_default_noise_beats_chance_threefold():
    train, test = default_corpus_split(2.0)
    X = np.vstack([fv.values for fv, _ in train])
    model = classifier.train_classifier(X, [label for _, label in train], SvmHyperparams(1.0, 0.05))
    acc, _ = classifier.evaluate(model, test, k=10)
    assert acc > 3 * 0.1
