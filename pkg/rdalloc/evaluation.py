"""
Rate-quality sweeps (baseline fixed-CRF, cluster-optimal, per-chunk oracle)
and Bjontegaard deltas between them.
"""
import logging
from collections import namedtuple
import numpy as np
from rdalloc.errors import RDAllocError, InfeasibleError
from rdalloc.allocation import QualityConstraints, solve_allocation, per_chunk_allocation, TOL
from logutils.events import log_event

logger = logging.getLogger(__name__)

# `q`: the exact grid point behind a CRF-labelled point, None for free-standing points
SweepPoint = namedtuple('SweepPoint', ['label', 'avg_rate', 'avg_quality', 'worst_quality', 'q'], defaults=(None,))

KINDS = ('baseline_expected', 'optimal_expected', 'baseline_actual', 'optimal_actual', 'oracle_actual')


class Sweep(object):
    """
    Points sorted by average rate, average quality strictly increasing along
    them; `solutions` holds the allocations behind optimal sweeps.
    """

    def __init__(self, kind, points, solutions=None):
        if kind not in KINDS:
            raise ValueError("unknown sweep kind %r" % kind)
        for p in points:
            if not all(np.isfinite([p.avg_rate, p.avg_quality, p.worst_quality])):
                raise RDAllocError("sweep %s: non-finite point %r" % (kind, p))
        order = sorted(range(len(points)), key=lambda i: points[i].avg_rate)
        self.kind = kind
        self.points = [points[i] for i in order]
        self.solutions = None if solutions is None else [solutions[i] for i in order]
        if not np.all(np.diff(self.qualities()) > 0):
            raise RDAllocError("sweep %s: average quality does not increase strictly with rate" % kind)

    def rates(self):
        return np.array([p.avg_rate for p in self.points])

    def qualities(self):
        return np.array([p.avg_quality for p in self.points])

    def check_bd_eligible(self):
        if len(self.points) < 4:
            raise RDAllocError("sweep %s has %d points, BD metrics need at least 4" % (self.kind, len(self.points)))
        if not np.all(self.rates() > 0):
            raise RDAllocError("sweep %s: rates must be positive" % self.kind)

    def __len__(self):
        return len(self.points)


def _label(q):
    return repr(float(q))


def _incumbent(grid, p, units):
    return None if p.q is None else [grid.index_of(p.q)] * units


def baseline_sweep_expected(model, w, crf_list):
    """Same CRF for every cluster, aggregated with the cluster weights."""
    points = []
    for q in crf_list:
        j = model.grid.index_of(q)
        point = float(model.grid.points[j])
        rates = model.rates[:, j]
        qualities = model.qualities[:, j]
        points.append(SweepPoint(_label(point), float(np.dot(w.weights, rates)), float(np.dot(w.weights, qualities)),
                                 float(qualities.min()), point))
    return Sweep('baseline_expected', points)


def optimal_sweep_expected(model, w, baseline):
    """
    Per baseline point, solve the allocation with that point's average and
    worst quality as thresholds. The uniform baseline assignment is always
    feasible, so it is handed to the solver as an incumbent.
    """
    if not len(baseline):
        raise RDAllocError("empty baseline sweep")
    points, solutions = [], []
    for p in baseline.points:
        constraints = QualityConstraints(p.avg_quality, p.worst_quality)
        try:
            sol = solve_allocation(model, w, constraints, incumbent=_incumbent(model.grid, p, model.k))
        except InfeasibleError as e:
            raise AssertionError("baseline point %s is achievable but was declared infeasible: %s" % (p.label, e))
        assert sol.avg_rate <= p.avg_rate * (1 + TOL) + TOL, "optimal point %s costs more than the baseline" % p.label
        points.append(SweepPoint(p.label, sol.avg_rate, sol.avg_quality, sol.worst_quality, p.q))
        solutions.append(sol)
    return Sweep('optimal_expected', points, solutions)


def _aggregate(rates, qualities):
    return float(np.mean(rates)), float(np.mean(qualities)), float(np.min(qualities))


def predict_chunks(samples, features, classifier):
    """Predicted cluster per sample, joined on chunk_id."""
    by_id = dict((fv.chunk_id, fv) for fv in features)
    missing = [s.chunk_id for s in samples if s.chunk_id not in by_id]
    if missing:
        raise RDAllocError("no features for chunks: %s" % ', '.join(missing))
    X = np.vstack([by_id[s.chunk_id].values for s in samples])
    return classifier.predict_many(X)


def actual_sweeps(samples, features, classifier, model, solutions, crf_list, predictions=None):
    """
    Baseline: one CRF for every chunk. Optimal: chunk i encoded at the
    operating point of its predicted cluster. Both measured on the chunks'
    own R-D curves.
    """
    if not samples:
        raise RDAllocError("no samples")
    if predictions is None:
        predictions = predict_chunks(samples, features, classifier)
    predictions = np.asarray(predictions, dtype=int)
    R = np.vstack([s.rates for s in samples])
    Q = np.vstack([s.qualities for s in samples])
    rows = np.arange(len(samples))

    baseline = []
    for q in crf_list:
        j = model.grid.index_of(q)
        point = float(model.grid.points[j])
        baseline.append(SweepPoint(_label(point), *_aggregate(R[:, j], Q[:, j]), q=point))

    optimal = []
    for q, sol in zip(crf_list, solutions):
        idx = np.asarray(sol.op_index, dtype=int)[predictions]
        optimal.append(SweepPoint(_label(q), *_aggregate(R[rows, idx], Q[rows, idx]), q=float(q)))
    return Sweep('baseline_actual', baseline), Sweep('optimal_actual', optimal, list(solutions))


def oracle_sweep(samples, baseline_actual, grid, worst_constraint=True):
    """Per-chunk allocation under each actual baseline point's thresholds."""
    floor = min(float(s.qualities.min()) for s in samples) - 1.0
    points, solutions = [], []
    for p in baseline_actual.points:
        worst = p.worst_quality if worst_constraint else floor
        sol = per_chunk_allocation(samples, QualityConstraints(p.avg_quality, worst), grid,
                                   incumbent=_incumbent(grid, p, len(samples)))
        points.append(SweepPoint(p.label, sol.avg_rate, sol.avg_quality, sol.worst_quality, p.q))
        solutions.append(sol)
    return Sweep('oracle_actual', points, solutions)


def _overlap(a, b):
    lo = max(a.min(), b.min())
    hi = min(a.max(), b.max())
    if not hi > lo:
        raise RDAllocError("curves do not overlap")
    return lo, hi


def _mean_over(poly, lo, hi):
    integral = np.polyint(poly)
    return (np.polyval(integral, hi) - np.polyval(integral, lo)) / (hi - lo)


def bd_rate(reference, test):
    """
    Bjontegaard delta rate in percent: cubic least-squares fits of log10(rate)
    over average quality, averaged over the shared quality range.
    Negative means the test sweep needs less rate.
    """
    reference.check_bd_eligible()
    test.check_bd_eligible()
    q_ref, q_test = reference.qualities(), test.qualities()
    lo, hi = _overlap(q_ref, q_test)
    fit_ref = np.polyfit(q_ref, np.log10(reference.rates()), 3)
    fit_test = np.polyfit(q_test, np.log10(test.rates()), 3)
    diff = _mean_over(fit_test, lo, hi) - _mean_over(fit_ref, lo, hi)
    return float((10.0 ** diff - 1.0) * 100.0)


def bd_quality(reference, test):
    """Bjontegaard delta quality in dB at equal rate (positive means test is better)."""
    reference.check_bd_eligible()
    test.check_bd_eligible()
    lr_ref, lr_test = np.log10(reference.rates()), np.log10(test.rates())
    lo, hi = _overlap(lr_ref, lr_test)
    fit_ref = np.polyfit(lr_ref, reference.qualities(), 3)
    fit_test = np.polyfit(lr_test, test.qualities(), 3)
    return float(_mean_over(fit_test, lo, hi) - _mean_over(fit_ref, lo, hi))


def compare(pair, reference, test):
    entry = dict(pair=pair, bd_rate_percent=bd_rate(reference, test),
                 bd_quality_db=bd_quality(reference, test))
    log_event('evaluation', 'bd_rate', pair=pair, bd_rate=entry['bd_rate_percent'])
    return entry
