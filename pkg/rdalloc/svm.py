"""
Binary soft-margin SVM with an RBF kernel, trained by SMO with
maximal-violating-pair working set selection.

Dual: minimize 1/2 a'Qa - e'a  s.t. 0 <= a <= C, y'a = 0,
with Q_ij = y_i y_j K(x_i, x_j) and K(x, z) = exp(-gamma |x - z|^2).
"""
import logging
import warnings
import numpy as np
from rdalloc.errors import RDAllocError, ShapeError, ConvergenceWarning
from logutils.events import log_event

logger = logging.getLogger(__name__)

KKT_TOL = 1e-3
MAX_PASSES = 200
TAU = 1e-12


class SvmHyperparams(object):
    def __init__(self, c, gamma):
        c, gamma = float(c), float(gamma)
        if not (np.isfinite(c) and c > 0 and np.isfinite(gamma) and gamma > 0):
            raise ValueError("c and gamma must be positive and finite, got c=%r gamma=%r" % (c, gamma))
        self.c = c
        self.gamma = gamma

    def __eq__(self, other):
        return isinstance(other, SvmHyperparams) and (self.c, self.gamma) == (other.c, other.gamma)

    def __ne__(self, other):
        return not self == other

    def __repr__(self):
        return "SvmHyperparams(c=%g, gamma=%g)" % (self.c, self.gamma)


class BinaryMachine(object):
    """
    Decision function f(x) = sum_s coef_s K(sv_s, x) + bias, coef_s = alpha_s y_s.
    `positive` / `negative` are the class ids behind labels +1 / -1.
    """

    def __init__(self, support_vectors, dual_coef, bias, gamma, positive=1, negative=-1, converged=True):
        self.support_vectors = np.atleast_2d(np.asarray(support_vectors, dtype=float))
        self.dual_coef = np.asarray(dual_coef, dtype=float)
        self.bias = float(bias)
        self.gamma = float(gamma)
        self.positive = positive
        self.negative = negative
        self.converged = converged
        if len(self.dual_coef) == 0 or len(self.dual_coef) != len(self.support_vectors):
            raise ShapeError("a machine needs one dual coefficient per support vector, at least one")

    def decision(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return rbf_kernel(X, self.support_vectors, self.gamma).dot(self.dual_coef) + self.bias

    def predict(self, X):
        return np.where(self.decision(X) > 0, self.positive, self.negative)


def rbf_kernel(A, B, gamma):
    sq = np.sum(A * A, axis=1)[:, None] + np.sum(B * B, axis=1)[None, :] - 2.0 * A.dot(B.T)
    return np.exp(-gamma * np.maximum(sq, 0.0))


class SmoSolution(object):
    def __init__(self, alpha, gradient, bias, iterations, converged, violation):
        self.alpha = alpha
        self.gradient = gradient
        self.bias = bias
        self.iterations = iterations
        self.converged = converged
        self.violation = violation


def _select_pair(alpha, G, y, c):
    minus_yg = -y * G
    up = ((y > 0) & (alpha < c)) | ((y < 0) & (alpha > 0))
    low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < c))
    if not up.any() or not low.any():
        return None, None, 0.0
    i = int(np.flatnonzero(up)[np.argmax(minus_yg[up])])
    j = int(np.flatnonzero(low)[np.argmin(minus_yg[low])])
    return i, j, float(minus_yg[i] - minus_yg[j])


def _bias(alpha, G, y, c):
    yg = y * G
    at_upper = alpha >= c
    at_lower = alpha <= 0
    free = ~(at_upper | at_lower)
    if free.any():
        rho = float(np.mean(yg[free]))
    else:
        ub_mask = (at_upper & (y < 0)) | (at_lower & (y > 0))
        lb_mask = (at_upper & (y > 0)) | (at_lower & (y < 0))
        ub = float(np.min(yg[ub_mask])) if ub_mask.any() else np.inf
        lb = float(np.max(yg[lb_mask])) if lb_mask.any() else -np.inf
        rho = (ub + lb) / 2.0 if np.isfinite(ub) and np.isfinite(lb) else (ub if np.isfinite(ub) else lb)
    return -rho


def smo(K, y, c, kkt_tol=KKT_TOL, max_passes=MAX_PASSES):
    """Solve the dual for a precomputed kernel matrix; y in {-1, +1}."""
    n = len(y)
    alpha = np.zeros(n)
    G = -np.ones(n)
    diag = np.diag(K)
    max_iter = max_passes * max(n, 10)
    violation = np.inf
    iterations = 0
    while iterations < max_iter:
        i, j, violation = _select_pair(alpha, G, y, c)
        if i is None or violation < kkt_tol:
            break
        iterations += 1
        Kij = K[i, j]
        old_i, old_j = alpha[i], alpha[j]
        quad = diag[i] + diag[j] - 2.0 * Kij
        if quad <= 0:
            quad = TAU
        if y[i] != y[j]:
            delta = (-G[i] - G[j]) / quad
            diff = alpha[i] - alpha[j]
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = diff
            else:
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = -diff
            if diff > 0:
                if alpha[i] > c:
                    alpha[i] = c
                    alpha[j] = c - diff
            else:
                if alpha[j] > c:
                    alpha[j] = c
                    alpha[i] = c + diff
        else:
            delta = (G[i] - G[j]) / quad
            total = alpha[i] + alpha[j]
            alpha[i] -= delta
            alpha[j] += delta
            if total > c:
                if alpha[i] > c:
                    alpha[i] = c
                    alpha[j] = total - c
                if alpha[j] > c:
                    alpha[j] = c
                    alpha[i] = total - c
            else:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = total
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = total
        d_i = alpha[i] - old_i
        d_j = alpha[j] - old_j
        # Q[:, t] = y * y_t * K[:, t]
        G += y * (y[i] * d_i * K[:, i] + y[j] * d_j * K[:, j])

    converged = violation < kkt_tol
    return SmoSolution(alpha, G, _bias(alpha, G, y, c), iterations, converged, violation)


def train_binary_svm(X, y, hp, kkt_tol=KKT_TOL, max_passes=MAX_PASSES, positive=1, negative=-1):
    """
    Train on already-scaled features X with labels y in {-1, +1}. If the
    iteration budget runs out the last iterate is returned with
    `converged=False` and a ConvergenceWarning.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    if len(X) != len(y):
        raise ShapeError("%d feature rows for %d labels" % (len(X), len(y)))
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise RDAllocError("binary labels must be -1 or +1")
    if not ((y > 0).any() and (y < 0).any()):
        raise RDAllocError("binary SVM training needs both labels present")

    K = rbf_kernel(X, X, hp.gamma)
    sol = smo(K, y, hp.c, kkt_tol=kkt_tol, max_passes=max_passes)
    if not sol.converged:
        log_event('classifier', 'smo.not_converged', show=False, passes=max_passes, violation=sol.violation)
        warnings.warn("SMO stopped after %d iterations with KKT violation %.3g" % (sol.iterations, sol.violation),
                      ConvergenceWarning)
    sv = sol.alpha > 0
    machine = BinaryMachine(X[sv], sol.alpha[sv] * y[sv], sol.bias, hp.gamma,
                            positive=positive, negative=negative, converged=sol.converged)
    machine.alpha = sol.alpha
    return machine
