"""
Corpus weights and the constrained allocation problem

    minimize    sum_l w_l rate_l(q_l)
    subject to  sum_l w_l quality_l(q_l) >= min_avg_quality
                min_l quality_l(q_l)     >= min_worst_quality

over the discrete operating-point grid. The worst-quality constraint is
handled per cluster; the average constraint goes to a Lagrange multiplier
found by bisection, followed by an exchange pass over one- and two-cluster
moves.
"""
import logging
import itertools
import numpy as np
from rdalloc.errors import RDAllocError, InfeasibleError, InstanceTooLargeError, ShapeError
from logutils.events import log_event

logger = logging.getLogger(__name__)

TOL = 1e-9
MAX_BISECTIONS = 100
MAX_COMBINATIONS = 10 ** 7
# two-cluster exchange moves are only tried up to this many units
PAIR_MOVE_LIMIT = 64


class CorpusDistribution(object):
    def __init__(self, weights, counts=None):
        weights = np.array(weights, dtype=float)
        if weights.ndim != 1 or len(weights) == 0:
            raise ShapeError("weights must be a non-empty vector")
        if np.any(weights < 0) or not np.all(np.isfinite(weights)):
            raise RDAllocError("weights must be finite and non-negative")
        if abs(weights.sum() - 1.0) > TOL:
            raise RDAllocError("weights sum to %r, expected 1" % weights.sum())
        weights.setflags(write=False)
        self.weights = weights
        self.counts = None if counts is None else [int(c) for c in counts]

    @classmethod
    def normalized(cls, weights):
        weights = np.asarray(weights, dtype=float)
        total = weights.sum()
        if not total > 0:
            raise RDAllocError("weights must have a positive sum")
        return cls(weights / total)

    @property
    def k(self):
        return len(self.weights)


class QualityConstraints(object):
    def __init__(self, min_avg_quality, min_worst_quality):
        self.min_avg_quality = float(min_avg_quality)
        self.min_worst_quality = float(min_worst_quality)
        if not (np.isfinite(self.min_avg_quality) and np.isfinite(self.min_worst_quality)):
            raise ValueError("quality thresholds must be finite")

    def __repr__(self):
        return "QualityConstraints(min_avg_quality=%g, min_worst_quality=%g)" % (
            self.min_avg_quality, self.min_worst_quality)


class AllocationSolution(object):
    def __init__(self, op_index, op_values, avg_rate, avg_quality, worst_quality, lambda_star, exact, iterations=0):
        self.op_index = [int(i) for i in op_index]
        self.op_values = [float(v) for v in op_values]
        self.avg_rate = float(avg_rate)
        self.avg_quality = float(avg_quality)
        self.worst_quality = float(worst_quality)
        self.lambda_star = float(lambda_star)
        self.exact = bool(exact)
        self.iterations = int(iterations)

    def satisfies(self, constraints):
        return (self.avg_quality >= constraints.min_avg_quality - TOL and
                self.worst_quality >= constraints.min_worst_quality - TOL)

    def to_dict(self):
        return dict(op_index=self.op_index, op_values=self.op_values, avg_rate=self.avg_rate,
                    avg_quality=self.avg_quality, worst_quality=self.worst_quality,
                    lambda_star=self.lambda_star, exact=self.exact)

    def __repr__(self):
        return "AllocationSolution(%s)" % self.to_dict()


def estimate_weights(predictions, k):
    """w_l = count_l / total."""
    predictions = np.asarray(predictions, dtype=int)
    if predictions.size == 0:
        raise RDAllocError("no predictions to estimate weights from")
    if predictions.min() < 0 or predictions.max() >= k:
        raise RDAllocError("cluster ids must be in [0, %d)" % k)
    counts = np.bincount(predictions, minlength=k)
    return CorpusDistribution(counts / float(counts.sum()), counts)


class _Instance(object):
    """Rates/qualities (units x grid) with unit weights and the grid values."""

    def __init__(self, rates, qualities, weights, points):
        self.rates = np.asarray(rates, dtype=float)
        self.qualities = np.asarray(qualities, dtype=float)
        self.weights = np.asarray(weights, dtype=float)
        self.points = np.asarray(points, dtype=float)
        if self.rates.shape != self.qualities.shape or self.rates.shape != (len(self.weights), len(self.points)):
            raise ShapeError("rates %s, qualities %s, %d weights and %d grid points do not line up" % (
                self.rates.shape, self.qualities.shape, len(self.weights), len(self.points)))

    def stats(self, idx):
        rows = np.arange(len(idx))
        r = self.rates[rows, idx]
        q = self.qualities[rows, idx]
        return float(np.dot(self.weights, r)), float(np.dot(self.weights, q)), float(q.min())

    def solution(self, idx, lambda_star, exact, iterations=0):
        avg_rate, avg_quality, worst = self.stats(idx)
        return AllocationSolution(idx, self.points[idx], avg_rate, avg_quality, worst, lambda_star, exact, iterations)


def _feasible_mask(inst, constraints):
    mask = inst.qualities >= constraints.min_worst_quality - TOL
    bad = np.flatnonzero(~mask.any(axis=1))
    if len(bad):
        raise InfeasibleError('min_worst_quality', "unit %d peaks at %.4f dB, below %.4f dB" % (
            bad[0], inst.qualities[bad[0]].max(), constraints.min_worst_quality))
    best_avg = float(np.dot(inst.weights, np.where(mask, inst.qualities, -np.inf).max(axis=1)))
    if best_avg < constraints.min_avg_quality - TOL:
        raise InfeasibleError('min_avg_quality', "at most %.4f dB on average, below %.4f dB" % (
            best_avg, constraints.min_avg_quality))
    return mask


def _pick(inst, mask, lam):
    """Per-unit argmin of rate - lam * quality over the feasible set; ties to higher quality."""
    cost = np.where(mask, inst.rates - lam * inst.qualities, np.inf)
    best = cost.min(axis=1)
    scale = np.maximum(np.abs(best), 1.0)
    ties = cost <= (best + 1e-12 * scale)[:, None]
    return np.argmax(np.where(ties, inst.qualities, -np.inf), axis=1)


def _better(candidate, incumbent):
    """Lower rate first, then higher quality, then lexicographically smaller indices."""
    if incumbent is None:
        return True
    (r1, q1, _), idx1 = candidate
    (r2, q2, _), idx2 = incumbent
    if r1 != r2:
        return r1 < r2
    if q1 != q2:
        return q1 > q2
    return list(idx1) < list(idx2)


def _exchange(inst, mask, idx, min_avg):
    """
    Steepest-descent over moves changing one or two units' operating points
    while the average constraint stays satisfied.
    """
    idx = idx.copy()
    units = len(idx)
    rows = np.arange(units)
    w = inst.weights
    wr = w[:, None] * inst.rates
    wq = w[:, None] * inst.qualities
    for _ in range(10 * units * inst.rates.shape[1]):
        avg_q = float(np.dot(w, inst.qualities[rows, idx]))
        slack = avg_q - (min_avg - TOL)
        d_rate = np.where(mask, wr - wr[rows, idx][:, None], np.inf)
        d_qual = wq - wq[rows, idx][:, None]

        ok = d_qual >= -slack
        single = np.where(ok, d_rate, np.inf)
        flat = int(np.argmin(single))
        best_gain = single.flat[flat]
        best_move = [np.unravel_index(flat, single.shape)]

        if units <= PAIR_MOVE_LIMIT:
            for a, b in itertools.combinations(range(units), 2):
                total_rate = d_rate[a][:, None] + d_rate[b][None, :]
                total_q = d_qual[a][:, None] + d_qual[b][None, :]
                total_rate = np.where(total_q >= -slack, total_rate, np.inf)
                f = int(np.argmin(total_rate))
                if total_rate.flat[f] < best_gain:
                    ja, jb = np.unravel_index(f, total_rate.shape)
                    best_gain = total_rate.flat[f]
                    best_move = [(a, ja), (b, jb)]

        if not best_gain < -1e-12 * max(abs(float(np.dot(w, inst.rates[rows, idx]))), 1.0):
            break
        for unit, j in best_move:
            idx[unit] = j
    return idx


def _solve(inst, constraints, incumbent=None):
    mask = _feasible_mask(inst, constraints)
    min_avg = constraints.min_avg_quality

    cheapest = _pick(inst, mask, 0.0)
    stats = inst.stats(cheapest)
    if stats[1] >= min_avg - TOL:
        log_event('allocation', 'slack', show=False, avg_rate=stats[0])
        return inst.solution(cheapest, 0.0, False)

    def meets(idx):
        return inst.stats(idx)[1] >= min_avg - TOL

    best = None
    candidates = {}
    hi = 1.0
    idx_hi = _pick(inst, mask, hi)
    for _ in range(1100):
        if meets(idx_hi):
            break
        hi *= 2.0
        idx_hi = _pick(inst, mask, hi)
    if not meets(idx_hi):
        # multiplier overflow; fall back to the per-unit best quality
        idx_hi = np.argmax(np.where(mask, inst.qualities, -np.inf), axis=1)
    candidates[hi] = idx_hi

    lo, iterations = 0.0, 0
    while iterations < MAX_BISECTIONS and hi - lo >= 1e-9 * hi:
        iterations += 1
        mid = 0.5 * (lo + hi)
        idx = _pick(inst, mask, mid)
        if meets(idx):
            hi = mid
            candidates[mid] = idx
        else:
            lo = mid
    idx_lo = _pick(inst, mask, lo)
    if meets(idx_lo):
        candidates[lo] = idx_lo

    lambda_star = hi
    for lam, idx in sorted(candidates.items()):
        entry = (inst.stats(idx), idx)
        if _better(entry, best):
            best, lambda_star = entry, lam
    if incumbent is not None:
        incumbent = np.asarray(incumbent, dtype=int)
        rows = np.arange(len(incumbent))
        if mask[rows, incumbent].all() and meets(incumbent):
            entry = (inst.stats(incumbent), incumbent)
            if _better(entry, best):
                best = entry

    refined = _exchange(inst, mask, best[1], min_avg)
    sol = inst.solution(refined, lambda_star, False, iterations)
    log_event('allocation', 'solved', show=False, avg_rate=sol.avg_rate, avg_quality=sol.avg_quality,
              worst_quality=sol.worst_quality, lambda_star=sol.lambda_star, iterations=iterations)
    return sol


def _model_instance(model, w):
    if w.k != model.k:
        raise ShapeError("%d weights for %d clusters" % (w.k, model.k))
    for curve in model.centroids:
        if not curve.is_monotone():
            raise RDAllocError("centroid %d is not monotone; repair it first" % curve.cluster_id)
    return _Instance(model.rates, model.qualities, w.weights, model.grid.points)


def solve_allocation(model, w, constraints, incumbent=None):
    """
    Lagrangian allocation over cluster centroid curves. A known feasible
    `incumbent` assignment, if given, competes with the bisection candidates.
    The best of those is refined by the unit and pair exchange pass, so
    `op_index` is not in general the per-unit minimizer at `lambda_star`;
    `lambda_star` is the multiplier of the best bisection candidate.
    """
    return _solve(_model_instance(model, w), constraints, incumbent)


def exhaustive_allocation(model, w, constraints):
    return _exhaustive(_model_instance(model, w), constraints)


def _exhaustive(inst, constraints):
    """
    Enumerate every feasible combination in lexicographic order of op_index;
    the first one with the minimum average rate wins.
    """
    units, s = inst.rates.shape
    if float(s) ** units > MAX_COMBINATIONS:
        raise InstanceTooLargeError("%d^%d combinations exceed the %d limit" % (s, units, MAX_COMBINATIONS))
    mask = _feasible_mask(inst, constraints)
    choices = [np.flatnonzero(mask[l]) for l in range(units)]
    w = inst.weights

    # last `tail` units are enumerated with numpy, the rest in python
    tail = units
    while tail > 0 and np.prod([float(len(c)) for c in choices[units - tail:]]) > 1e5:
        tail -= 1
    head_choices, tail_choices = choices[:units - tail], choices[units - tail:]
    if tail:
        grids = np.meshgrid(*tail_choices, indexing='ij')
        tail_idx = np.stack([g.ravel() for g in grids], axis=1)
        tail_rate = sum(w[units - tail + m] * inst.rates[units - tail + m, tail_idx[:, m]] for m in range(tail))
        tail_qual = sum(w[units - tail + m] * inst.qualities[units - tail + m, tail_idx[:, m]] for m in range(tail))
    else:
        tail_idx = np.zeros((1, 0), dtype=int)
        tail_rate = np.zeros(1)
        tail_qual = np.zeros(1)

    best_rate, best_idx, combos = np.inf, None, 0
    for head in itertools.product(*head_choices):
        head_rate = sum(w[l] * inst.rates[l, j] for l, j in enumerate(head))
        head_qual = sum(w[l] * inst.qualities[l, j] for l, j in enumerate(head))
        combos += len(tail_idx)
        total_qual = head_qual + tail_qual
        total_rate = np.where(total_qual >= constraints.min_avg_quality - TOL, head_rate + tail_rate, np.inf)
        i = int(np.argmin(total_rate))
        if total_rate[i] < best_rate:
            best_rate = float(total_rate[i])
            best_idx = np.concatenate([np.asarray(head, dtype=int), tail_idx[i]]).astype(int)

    if best_idx is None:
        raise InfeasibleError('min_avg_quality', "no combination reaches %.4f dB" % constraints.min_avg_quality)
    log_event('allocation', 'exhaustive', show=False, combinations=combos, avg_rate=best_rate)
    return inst.solution(best_idx, 0.0, True)


def per_chunk_allocation(samples, constraints, grid=None, incumbent=None):
    """Every chunk is its own unit with weight 1/n: the per-chunk oracle."""
    if not samples:
        raise RDAllocError("no samples to allocate")
    rates = np.vstack([s.rates for s in samples])
    qualities = np.vstack([s.qualities for s in samples])
    points = grid.points if grid is not None else np.arange(rates.shape[1], dtype=float)
    n = len(samples)
    return _solve(_Instance(rates, qualities, np.full(n, 1.0 / n), points), constraints, incumbent)


def per_chunk_exhaustive(samples, constraints, grid=None):
    rates = np.vstack([s.rates for s in samples])
    qualities = np.vstack([s.qualities for s in samples])
    points = grid.points if grid is not None else np.arange(rates.shape[1], dtype=float)
    n = len(samples)
    return _exhaustive(_Instance(rates, qualities, np.full(n, 1.0 / n), points), constraints)
