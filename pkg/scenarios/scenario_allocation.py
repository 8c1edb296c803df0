import pytest
import numpy as np
from rdalloc import allocation
from rdalloc.allocation import CorpusDistribution, QualityConstraints
from rdalloc.rd_model import OperatingPointGrid, RDSample
from rdalloc.errors import RDAllocError, InfeasibleError, InstanceTooLargeError, ShapeError

RATES = [[1000., 500., 250.], [3000., 1500., 700.]]
QUALITIES = [[40., 37., 34.], [42., 38., 33.]]
HALF = CorpusDistribution([0.5, 0.5])

def feasible_range(model, w, worst):
    """(lowest, highest) reachable average quality once every cluster respects `worst`."""
    masked = np.where(model.qualities >= worst, model.qualities, np.nan)
    hi = float(np.dot(w.weights, np.nanmax(masked, axis=1)))
    lo = float(np.dot(w.weights, np.nanmin(masked, axis=1)))
    return lo, hi

def random_instance(rng, curve_factory, model_factory, k, s):
    rates, qualities = curve_factory(rng, k, s)
    model = model_factory(rates, qualities, np.linspace(20, 50, s))
    w = CorpusDistribution.normalized(rng.uniform(0.1, 1.0, k))
    worst = float(np.min(model.qualities[:, s // 2])) - rng.uniform(0, 2)
    lo, hi = feasible_range(model, w, worst)
    avg = lo + rng.uniform(0.05, 0.95) * (hi - lo)
    return model, w, QualityConstraints(avg, worst)

def test_estimate_weights():
    dist = allocation.estimate_weights([0, 0, 1, 1], 2)
    assert list(dist.weights) == [0.5, 0.5]
    dist = allocation.estimate_weights([3] * 7, 5)
    assert list(dist.weights) == [0., 0., 0., 1., 0.]
    assert dist.counts == [0, 0, 0, 7, 0]
    with pytest.raises(RDAllocError):
        allocation.estimate_weights([], 3)
    with pytest.raises(RDAllocError):
        allocation.estimate_weights([0, 3], 3)

def test_estimate_weights_from_multinomial():
    rng = np.random.default_rng(0)
    p = np.array([0.5, 0.3, 0.15, 0.05])
    n = 10000
    dist = allocation.estimate_weights(rng.choice(4, size=n, p=p), 4)
    sigma = np.sqrt(p * (1 - p) / n)
    assert np.all(np.abs(dist.weights - p) <= 3 * sigma)

def test_distribution_validation():
    with pytest.raises(RDAllocError):
        CorpusDistribution([0.5, 0.6])
    with pytest.raises(RDAllocError):
        CorpusDistribution([1.5, -0.5])
    assert np.allclose(CorpusDistribution.normalized([2, 6]).weights, [0.25, 0.75])

def test_hand_built_instance(model_factory):
    model = model_factory(RATES, QUALITIES, [20, 30, 40])
    constraints = QualityConstraints(37.5, 33.0)
    sol = allocation.solve_allocation(model, HALF, constraints)
    assert sol.op_index == [1, 1]
    assert sol.op_values == [30.0, 30.0]
    assert sol.avg_rate == 1000.0
    assert sol.avg_quality == 37.5
    assert sol.worst_quality == 37.0
    assert not sol.exact
    assert sol.satisfies(constraints)
    oracle = allocation.exhaustive_allocation(model, HALF, constraints)
    assert oracle.op_index == [1, 1]
    assert oracle.exact

def test_two_point_grid_by_hand(model_factory):
    model = model_factory([[800., 300.], [900., 200.]], [[40., 35.], [41., 33.]])
    # (0,0) 850/40.5  (0,1) 500/36.5  (1,0) 600/38  (1,1) 250/34
    oracle = allocation.exhaustive_allocation(model, HALF, QualityConstraints(37.0, 30.0))
    assert oracle.op_index == [1, 0]
    assert oracle.avg_rate == 600.0

def test_slack_constraints_pick_cheapest(model_factory):
    model = model_factory(RATES, QUALITIES)
    sol = allocation.solve_allocation(model, HALF, QualityConstraints(20.0, 20.0))
    assert sol.op_index == [2, 2]
    assert sol.lambda_star == 0.0

def test_zero_multiplier_means_cheapest_feasible(model_factory):
    model = model_factory(RATES, QUALITIES)
    # worst constraint alone pushes cluster 1 up one step
    sol = allocation.solve_allocation(model, HALF, QualityConstraints(30.0, 34.0))
    assert sol.lambda_star == 0.0
    assert sol.op_index == [2, 1]

def test_single_cluster(model_factory):
    model = model_factory([RATES[1]], [QUALITIES[1]])
    w = CorpusDistribution([1.0])
    constraints = QualityConstraints(37.5, 30.0)
    sol = allocation.solve_allocation(model, w, constraints)
    assert sol.op_index == [1]
    assert allocation.exhaustive_allocation(model, w, constraints).op_index == [1]

def test_infeasible_constraints_name_the_binding_one(model_factory):
    model = model_factory(RATES, QUALITIES)
    with pytest.raises(InfeasibleError) as info:
        allocation.solve_allocation(model, HALF, QualityConstraints(30.0, 41.0))
    assert info.value.constraint == 'min_worst_quality'
    with pytest.raises(InfeasibleError) as info:
        allocation.solve_allocation(model, HALF, QualityConstraints(41.5, 30.0))
    assert info.value.constraint == 'min_avg_quality'
    with pytest.raises(InfeasibleError):
        allocation.exhaustive_allocation(model, HALF, QualityConstraints(41.5, 30.0))

def test_weights_must_match_clusters(model_factory):
    model = model_factory(RATES, QUALITIES)
    with pytest.raises(ShapeError):
        allocation.solve_allocation(model, CorpusDistribution([1.0]), QualityConstraints(30, 30))

def test_exhaustive_guard(model_factory):
    rng = np.random.default_rng(0)
    rates, qualities = np.sort(rng.uniform(1, 10, (8, 8)))[:, ::-1], np.sort(rng.uniform(30, 40, (8, 8)))[:, ::-1]
    model = model_factory(rates, qualities)
    with pytest.raises(InstanceTooLargeError):
        allocation.exhaustive_allocation(model, CorpusDistribution(np.full(8, 0.125)), QualityConstraints(30, 30))

def test_scaling_weights_keeps_assignment(model_factory, curve_factory):
    rng = np.random.default_rng(12)
    model, w, constraints = random_instance(rng, curve_factory, model_factory, 4, 6)
    scaled = CorpusDistribution.normalized(w.weights * 37.0)
    a = allocation.solve_allocation(model, w, constraints)
    b = allocation.solve_allocation(model, scaled, constraints)
    assert a.op_index == b.op_index

def test_matches_exhaustive_on_random_instances(model_factory, curve_factory):
    rng = np.random.default_rng(2024)
    for trial in range(60):
        k = int(rng.integers(1, 5))
        s = int(rng.integers(2, 7))
        model, w, constraints = random_instance(rng, curve_factory, model_factory, k, s)
        sol = allocation.solve_allocation(model, w, constraints)
        oracle = allocation.exhaustive_allocation(model, w, constraints)
        assert sol.satisfies(constraints), trial
        assert oracle.satisfies(constraints), trial
        assert sol.avg_rate >= oracle.avg_rate * (1 - 1e-12), trial
        assert sol.avg_rate <= oracle.avg_rate * 1.005, trial

def test_exchange_refines_the_bisection_candidate(model_factory, curve_factory):
    rng = np.random.default_rng(31)
    for trial in range(30):
        model, w, constraints = random_instance(rng, curve_factory, model_factory, 3, 6)
        sol = allocation.solve_allocation(model, w, constraints)
        inst = allocation._model_instance(model, w)
        lagrangian = allocation._pick(inst, allocation._feasible_mask(inst, constraints), sol.lambda_star)
        rate, quality, _ = inst.stats(lagrangian)
        if sol.lambda_star > 0:
            assert quality >= constraints.min_avg_quality - allocation.TOL, trial
        assert sol.avg_rate <= rate * (1 + 1e-12), trial
        assert sol.satisfies(constraints), trial

def test_relaxing_never_costs_more(model_factory, curve_factory):
    rng = np.random.default_rng(5)
    model, w, constraints = random_instance(rng, curve_factory, model_factory, 2, 6)
    lo, hi = feasible_range(model, w, constraints.min_worst_quality)
    ladder = np.linspace(hi, lo, 12)
    for solve in (allocation.solve_allocation, allocation.exhaustive_allocation):
        rates = [solve(model, w, QualityConstraints(q, constraints.min_worst_quality)).avg_rate for q in ladder]
        assert np.all(np.diff(rates) <= 1e-9)
    worst_ladder = np.linspace(constraints.min_worst_quality, constraints.min_worst_quality - 5, 6)
    rates = [allocation.exhaustive_allocation(model, w, QualityConstraints(lo, q)).avg_rate for q in worst_ladder]
    assert np.all(np.diff(rates) <= 1e-9)

def samples_from(rates, qualities):
    grid = OperatingPointGrid(range(rates.shape[1]))
    return [RDSample('c%d' % i, r, q, grid) for i, (r, q) in enumerate(zip(rates, qualities))], grid

def test_per_chunk_matches_exhaustive(curve_factory):
    rng = np.random.default_rng(8)
    rates, qualities = curve_factory(rng, 5, 4)
    samples, grid = samples_from(rates, qualities)
    worst = float(qualities[:, 1].min())
    avg = float(np.mean(qualities[:, 1]))
    constraints = QualityConstraints(avg, worst)
    sol = allocation.per_chunk_allocation(samples, constraints, grid)
    oracle = allocation.per_chunk_exhaustive(samples, constraints, grid)
    assert sol.satisfies(constraints)
    assert oracle.avg_rate <= sol.avg_rate <= oracle.avg_rate * 1.005
    assert len(sol.op_index) == 5

def test_per_chunk_single_and_identical(curve_factory):
    rng = np.random.default_rng(1)
    rates, qualities = curve_factory(rng, 1, 5)
    samples, grid = samples_from(rates, qualities)
    target = float(qualities[0, 2])
    sol = allocation.per_chunk_allocation(samples, QualityConstraints(target, target), grid)
    assert sol.op_index == [2]
    copies, grid = samples_from(np.repeat(rates, 4, axis=0), np.repeat(qualities, 4, axis=0))
    sol = allocation.per_chunk_allocation(copies, QualityConstraints(target, target), grid)
    assert sol.op_index == [2, 2, 2, 2]
    assert np.isclose(sol.avg_rate, rates[0, 2])
