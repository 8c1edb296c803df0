"""
R-D cluster prediction from complexity features: standardization, a
one-vs-one RBF SVM ensemble, stratified splitting, grid-search
cross-validation and evaluation.
"""
import logging
import itertools
from collections import namedtuple
import numpy as np
from sklearn.model_selection import StratifiedKFold, LeaveOneOut, train_test_split
from rdalloc.errors import RDAllocError, ShapeError
from rdalloc.rd_model import EPSILON_STD
from rdalloc.svm import SvmHyperparams, BinaryMachine, train_binary_svm, KKT_TOL, MAX_PASSES
from rdalloc.tasks import run_parallel
from logutils.events import log_event

logger = logging.getLogger(__name__)

C_GRID = (0.1, 1.0, 10.0, 100.0)
GAMMA_GRID = (0.01, 0.1, 1.0, 10.0)

CvReport = namedtuple('CvReport', ['cv_grid', 'best', 'best_accuracy'])
TrainReport = namedtuple('TrainReport', ['cv_grid', 'best', 'test_accuracy', 'confusion_matrix',
                                         'train_count', 'test_count'])


class FeatureVector(object):
    def __init__(self, chunk_id, values):
        self.chunk_id = str(chunk_id)
        self.values = np.array(values, dtype=float)
        self.values.setflags(write=False)
        if self.values.ndim != 1 or not np.all(np.isfinite(self.values)):
            raise RDAllocError("chunk %s: features must be a finite vector" % self.chunk_id)

    def __len__(self):
        return len(self.values)

    def __repr__(self):
        return "FeatureVector(%r, f=%d)" % (self.chunk_id, len(self))


class FeatureScaler(object):
    def __init__(self, means, stds):
        self.means = np.asarray(means, dtype=float)
        self.stds = np.maximum(np.asarray(stds, dtype=float), EPSILON_STD)

    @classmethod
    def fit(cls, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        stds = X.std(axis=0, ddof=1) if len(X) > 1 else np.zeros(X.shape[1])
        return cls(X.mean(axis=0), stds)

    def transform(self, X):
        X = np.asarray(X, dtype=float)
        if X.shape[-1] != len(self.means):
            raise ShapeError("%d features, scaler expects %d" % (X.shape[-1], len(self.means)))
        return (X - self.means) / self.stds


class ClassifierModel(object):
    """
    One binary machine per unordered class pair (a, b), a < b, with a on the
    positive side. Feature scaling happens inside `predict`.
    """

    def __init__(self, scaler, classes, machines, hyperparams):
        self.scaler = scaler
        self.classes = [int(c) for c in classes]
        self.machines = dict(machines)
        self.hyperparams = hyperparams
        expected = set(itertools.combinations(self.classes, 2))
        if set(self.machines) != expected:
            raise RDAllocError("expected one machine per class pair")

    @property
    def n_features(self):
        return len(self.scaler.means)

    def predict_many(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n_features:
            raise ShapeError("%d features, model expects %d" % (X.shape[1], self.n_features))
        Z = self.scaler.transform(X)
        if len(self.classes) == 1:
            return np.full(len(Z), self.classes[0], dtype=int)
        index = dict((c, i) for i, c in enumerate(self.classes))
        votes = np.zeros((len(Z), len(self.classes)), dtype=int)
        strength = np.zeros((len(Z), len(self.classes)))
        for (a, b), machine in sorted(self.machines.items()):
            dec = machine.decision(Z)
            winner = np.where(dec > 0, index[a], index[b])
            rows = np.arange(len(Z))
            votes[rows, winner] += 1
            strength[rows, winner] += np.abs(dec)
        predictions = np.empty(len(Z), dtype=int)
        for r in range(len(Z)):
            top = np.flatnonzero(votes[r] == votes[r].max())
            if len(top) > 1:
                best = strength[r, top].max()
                top = top[strength[r, top] == best]
            predictions[r] = self.classes[int(top[0])]
        return predictions

    def predict(self, x):
        values = x.values if isinstance(x, FeatureVector) else x
        return int(self.predict_many(np.asarray(values, dtype=float)[None, :])[0])


def predict(model, x):
    return model.predict(x)


def _unpack(dataset):
    if not dataset:
        raise RDAllocError("empty dataset")
    X = np.vstack([fv.values for fv, _ in dataset])
    y = np.array([int(label) for _, label in dataset], dtype=int)
    return X, y


def _random_state(seed):
    return int(np.random.SeedSequence(int(seed)).generate_state(1)[0])


def train_classifier(X, y, hp, kkt_tol=KKT_TOL, max_passes=MAX_PASSES, max_workers=4):
    """Fit the scaler and every one-vs-one machine on raw features X."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=int)
    scaler = FeatureScaler.fit(X)
    Z = scaler.transform(X)
    classes = sorted(set(y.tolist()))
    pairs = list(itertools.combinations(classes, 2))

    def fit_pair(pair):
        a, b = pair
        mask = (y == a) | (y == b)
        labels = np.where(y[mask] == a, 1.0, -1.0)
        return train_binary_svm(Z[mask], labels, hp, kkt_tol=kkt_tol, max_passes=max_passes,
                                positive=a, negative=b)

    machines = run_parallel(fit_pair, pairs, max_workers=max_workers,
                            label='one-vs-one machines' if max_workers > 1 else None)
    return ClassifierModel(scaler, classes, zip(pairs, machines), hp)


def split_train_test(dataset, ratio, seed):
    """Stratified split; every class needs at least 2 members."""
    if not 0 < ratio < 1:
        raise ValueError("split ratio must be in (0, 1), got %r" % ratio)
    X, y = _unpack(dataset)
    classes, counts = np.unique(y, return_counts=True)
    if counts.min() < 2:
        raise RDAllocError("class %d has a single sample, cannot stratify" % classes[np.argmin(counts)])
    try:
        train_idx, test_idx = train_test_split(np.arange(len(y)), train_size=ratio, stratify=y,
                                               random_state=_random_state(seed))
    except ValueError as e:
        raise RDAllocError("cannot split: %s" % e)
    train_idx, test_idx = np.sort(train_idx), np.sort(test_idx)
    return [dataset[i] for i in train_idx], [dataset[i] for i in test_idx]


def fold_indices(y, folds, seed):
    y = np.asarray(y)
    if folds < 2:
        raise ValueError("need at least 2 folds, got %r" % folds)
    if folds == len(y):
        return list(LeaveOneOut().split(np.zeros(len(y))))
    classes, counts = np.unique(y, return_counts=True)
    if counts.min() < folds:
        raise RDAllocError("class %d has %d samples, fewer than %d folds" % (
            classes[np.argmin(counts)], counts.min(), folds))
    skf = StratifiedKFold(n_splits=folds, shuffle=True, random_state=_random_state(seed))
    return list(skf.split(np.zeros(len(y)), y))


def accuracy(truth, predicted):
    truth, predicted = np.asarray(truth), np.asarray(predicted)
    return float(np.mean(truth == predicted))


def grid_search_cv(train, c_grid=C_GRID, gamma_grid=GAMMA_GRID, folds=5, seed=0, max_workers=4):
    """
    Mean validation accuracy per (c, gamma) cell over stratified folds. The
    best cell has the highest accuracy; ties go to smaller c, then smaller gamma.
    """
    X, y = _unpack(train)
    splits = fold_indices(y, folds, seed)
    cells = [(float(c), float(g)) for c in sorted(c_grid) for g in sorted(gamma_grid)]

    def score(cell):
        hp = SvmHyperparams(*cell)
        scores = []
        for train_idx, val_idx in splits:
            model = train_classifier(X[train_idx], y[train_idx], hp, max_workers=1)
            scores.append(accuracy(y[val_idx], model.predict_many(X[val_idx])))
        return float(np.mean(scores))

    scores = run_parallel(score, cells, max_workers=max_workers, label='grid search')
    cv_grid = []
    best = None
    for (c, g), acc in zip(cells, scores):
        log_event('classifier', 'cv.cell', show=False, c=c, gamma=g, accuracy=acc)
        cv_grid.append((c, g, acc))
        if best is None or acc > best[2]:
            best = (c, g, acc)
    log_event('classifier', 'cv.best', c=best[0], gamma=best[1], accuracy=best[2])
    return CvReport(cv_grid, SvmHyperparams(best[0], best[1]), best[2])


def confusion_matrix(truth, predicted, k=None):
    truth = np.asarray(truth, dtype=int)
    predicted = np.asarray(predicted, dtype=int)
    if k is None:
        k = int(max(truth.max(), predicted.max())) + 1
    matrix = np.zeros((k, k), dtype=int)
    np.add.at(matrix, (truth, predicted), 1)
    return matrix


def evaluate(model, test, k=None):
    """(accuracy, confusion matrix indexed [true][predicted] by cluster id)."""
    if not test:
        raise RDAllocError("empty test set")
    X, y = _unpack(test)
    predicted = model.predict_many(X)
    if k is None:
        k = max(max(model.classes), int(y.max())) + 1
    matrix = confusion_matrix(y, predicted, k)
    acc = float(np.trace(matrix)) / float(matrix.sum())
    log_event('classifier', 'evaluated', accuracy=acc, test_count=len(y))
    return acc, matrix


def train_and_report(dataset, ratio=0.8, folds=5, seed=0, c_grid=C_GRID, gamma_grid=GAMMA_GRID, k=None,
                     max_workers=4):
    """Split, grid-search, refit on the whole training split and test."""
    train, test = split_train_test(dataset, ratio, seed)
    cv = grid_search_cv(train, c_grid, gamma_grid, folds, seed, max_workers=max_workers)
    X, y = _unpack(train)
    model = train_classifier(X, y, cv.best, max_workers=max_workers)
    acc, matrix = evaluate(model, test, k)
    return model, TrainReport(cv.cv_grid, cv.best, acc, matrix, len(train), len(test))


def project_pca(X, scaler=None, components=2):
    """Scaled features projected on their leading principal components."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Z = (scaler or FeatureScaler.fit(X)).transform(X)
    Z = Z - Z.mean(axis=0)
    _, _, vt = np.linalg.svd(Z, full_matrices=False)
    basis = vt[:components]
    # sign convention: largest-magnitude loading positive
    signs = np.sign(basis[np.arange(len(basis)), np.argmax(np.abs(basis), axis=1)])
    signs[signs == 0] = 1
    return Z.dot((basis * signs[:, None]).T)


def inject_label_noise(labels, fraction, k, seed):
    """Replace a `fraction` of labels by a different uniformly drawn cluster id."""
    labels = np.array(labels, dtype=int)
    if not 0 <= fraction <= 1:
        raise ValueError("noise fraction must be in [0, 1]")
    if k < 2 or fraction == 0:
        return labels
    rng = np.random.default_rng([int(seed), 0x6e6f697365])
    flip = rng.choice(len(labels), size=int(round(fraction * len(labels))), replace=False)
    shift = rng.integers(1, k, size=len(flip))
    labels[flip] = (labels[flip] + shift) % k
    return labels
