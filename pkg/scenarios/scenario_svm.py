import warnings
import pytest
import numpy as np
from rdalloc import svm
from rdalloc.svm import SvmHyperparams, BinaryMachine
from rdalloc.errors import RDAllocError, ConvergenceWarning

def two_classes(n=30, sep=2.0, spread=0.5, seed=0):
    rng = np.random.default_rng(seed)
    X = np.vstack([rng.normal(sep, spread, size=(n, 2)), rng.normal(-sep, spread, size=(n, 2))])
    y = np.r_[np.ones(n), -np.ones(n)]
    return X, y

def assert_kkt(machine, X, y, hp, tol):
    alpha = machine.alpha
    assert np.all(alpha >= 0)
    assert np.all(alpha <= hp.c)
    assert abs(np.dot(alpha, y)) < 1e-9
    margin = y * machine.decision(X)
    free = (alpha > 1e-8) & (alpha < hp.c - 1e-8)
    assert np.all(margin[alpha <= 1e-8] >= 1 - tol)
    assert np.all(np.abs(margin[free] - 1) <= tol)
    assert np.all(margin[alpha >= hp.c - 1e-8] <= 1 + tol)

def test_hyperparams_validation():
    with pytest.raises(ValueError):
        SvmHyperparams(0, 1)
    with pytest.raises(ValueError):
        SvmHyperparams(1, float('inf'))
    assert SvmHyperparams(1, 0.5) == SvmHyperparams(1.0, 0.5)

def test_rbf_kernel():
    A = np.array([[0., 0.], [1., 1.]])
    K = svm.rbf_kernel(A, A, 0.5)
    assert np.allclose(np.diag(K), 1.0)
    assert np.isclose(K[0, 1], np.exp(-1.0))

def test_separable_data():
    X, y = two_classes()
    hp = SvmHyperparams(10.0, 0.5)
    machine = svm.train_binary_svm(X, y, hp, kkt_tol=1e-4)
    assert machine.converged
    assert np.array_equal(machine.predict(X), y.astype(int))
    assert 0 < len(machine.support_vectors) < len(X)
    assert_kkt(machine, X, y, hp, tol=1e-3)

def test_overlapping_data_satisfies_kkt():
    X, y = two_classes(sep=0.5, spread=1.0, seed=4)
    hp = SvmHyperparams(1.0, 1.0)
    machine = svm.train_binary_svm(X, y, hp, kkt_tol=1e-5)
    assert machine.converged
    # some points sit at the box bound
    assert np.any(machine.alpha >= hp.c - 1e-8)
    assert_kkt(machine, X, y, hp, tol=1e-3)

def test_class_ids_on_machine():
    X, y = two_classes()
    machine = svm.train_binary_svm(X, y, SvmHyperparams(1.0, 0.5), positive=4, negative=7)
    assert set(machine.predict(X)) == {4, 7}

def test_duplicate_non_support_vector_changes_nothing():
    X, y = two_classes(seed=2)
    hp = SvmHyperparams(1.0, 0.5)
    first = svm.train_binary_svm(X, y, hp, kkt_tol=1e-6)
    margin = np.where(first.alpha == 0, y * first.decision(X), -np.inf)
    inner = int(np.argmax(margin))
    assert margin[inner] > 1.001
    X2, y2 = np.vstack([X, X[inner:inner + 1]]), np.r_[y, y[inner]]
    second = svm.train_binary_svm(X2, y2, hp, kkt_tol=1e-6)
    assert second.alpha[-1] == 0.0
    points = np.random.default_rng(9).normal(0, 3, size=(50, 2))
    assert np.allclose(first.decision(points), second.decision(points), atol=1e-4)

def test_single_class_rejected():
    X, _ = two_classes()
    with pytest.raises(RDAllocError):
        svm.train_binary_svm(X, np.ones(len(X)), SvmHyperparams(1, 1))
    with pytest.raises(RDAllocError):
        svm.train_binary_svm(X, np.zeros(len(X)), SvmHyperparams(1, 1))

def test_iteration_budget_warns():
    X, y = two_classes(n=40, sep=0.2, spread=1.0, seed=1)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter('always')
        machine = svm.train_binary_svm(X, y, SvmHyperparams(100.0, 5.0), kkt_tol=1e-12, max_passes=1)
    assert not machine.converged
    assert any(issubclass(w.category, ConvergenceWarning) for w in caught)
    # the last iterate is still a usable machine
    assert machine.decision(X).shape == (len(X),)

def test_machine_needs_coefficients():
    with pytest.raises(RDAllocError):
        BinaryMachine(np.zeros((0, 2)), [], 0.0, 1.0)
