import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pnormflow.clustering import (
    METRIC_FIELDS,
    default_delta_grid,
    delta_search,
    evaluate,
    metrics_record,
    naive_sweep_profile,
    run_pipeline,
    sweep_cut,
)
from pnormflow.errors import InfeasibleMassError, NoClusterError, ParameterError
from pnormflow.graph import Graph, conductance

from conftest import connected_graphs, random_connected


def test_sweep_path(path4):
    res = sweep_cut(path4, {0: 1.0, 1: 0.5})
    np.testing.assert_allclose(res.profile, [1.0, 1 / 3])
    assert res.best_cut.members == {0, 1}
    assert res.best_conductance == pytest.approx(1 / 3)


def test_sweep_star():
    star = Graph.from_edges(4, [(0, 1), (0, 2), (0, 3)])
    res = sweep_cut(star, {0: 1.0})
    assert res.best_cut.members == {0} and res.best_conductance == 1.0
    assert len(res.profile) == 1


def test_sweep_ties_break_by_id(path4):
    res = sweep_cut(path4, np.array([0.0, 1.0, 1.0, 0.0]))
    assert res.order.tolist() == [1, 2]


def test_sweep_conductance_tie_prefers_shorter_prefix():
    # on the path 0-...-5, prefixes {2,3} and {1,2,3} both cut 2 edges over volume 4
    g = Graph.from_edges(6, [(i, i + 1) for i in range(5)])
    res = sweep_cut(g, {2: 3.0, 3: 2.0, 1: 1.0})
    np.testing.assert_allclose(res.profile, [1.0, 0.5, 0.5])
    assert res.best_cut.members == {2, 3}


def test_sweep_errors(path4):
    with pytest.raises(NoClusterError):
        sweep_cut(path4, {})
    with pytest.raises(NoClusterError):
        sweep_cut(path4, np.ones(4))


def test_sweep_ignores_zero_heights(path4):
    res = sweep_cut(path4, np.array([0.5, 0.0, 0.0, 0.0]))
    assert res.order.tolist() == [0]


def test_sweep_on_solution(small_dumbbell):
    sweep, sol = run_pipeline(small_dumbbell, [10], 121 / 4, 4.0, rng_seed=0,
                              budget=5_000_000)
    assert len(sweep.profile) == len(sol.support)
    assert sweep.best_cut.members == set(range(21))
    assert sweep.best_conductance == pytest.approx(1 / 65)


@settings(max_examples=60, deadline=None)
@given(connected_graphs(min_n=3, max_n=15), st.data())
def test_sweep_invariants(g, data):
    k = data.draw(st.integers(1, g.n - 1))
    heights = data.draw(st.lists(st.floats(0.01, 10.0), min_size=k, max_size=k))
    nodes = data.draw(st.permutations(range(g.n)))[:k]
    x = dict(zip(nodes, heights))
    res = sweep_cut(g, x)
    assert res.best_conductance == res.profile.min()
    assert res.best_cut.members == set(res.order[:res.best_size].tolist())
    np.testing.assert_allclose(res.profile, naive_sweep_profile(g, x), rtol=1e-12)
    for c in (1e-3, 7.0):
        scaled = sweep_cut(g, {v: c * h for v, h in x.items()})
        assert scaled.best_cut == res.best_cut
        np.testing.assert_array_equal(scaled.order, res.order)


@pytest.mark.parametrize("seed", range(5))
def test_incremental_profile_on_larger_graphs(seed):
    rng = np.random.default_rng(seed)
    g = random_connected(rng, 100, 0.04)
    x = np.where(rng.random(100) < 0.7, rng.random(100), 0.0)
    res = sweep_cut(g, x)
    np.testing.assert_allclose(res.profile, naive_sweep_profile(g, x), rtol=1e-12)


def test_evaluate_examples(path4):
    m = evaluate(path4, {0, 1}, {0, 1})
    assert (m.precision, m.recall, m.f1, m.jaccard) == (1.0, 1.0, 1.0, 1.0)
    assert evaluate(path4, {0}, {3}).f1 == 0.0
    g = random_connected(np.random.default_rng(0), 10)
    m = evaluate(g, {0, 1, 2, 3}, {1, 2, 3, 4, 5, 6})
    assert (m.precision, m.recall) == (0.75, 0.5)
    assert m.f1 == pytest.approx(0.6)
    assert m.jaccard == pytest.approx(3 / 7)
    assert m.conductance == conductance(g, {0, 1, 2, 3})


def test_evaluate_whole_graph_has_no_conductance(path4):
    assert math.isnan(evaluate(path4, range(4), {0}).conductance)


def test_evaluate_rejects_empty(path4):
    with pytest.raises(ParameterError):
        evaluate(path4, set(), {0})


def test_metrics_record_schema(path4):
    rec = metrics_record(None, None, None)
    assert tuple(rec) == METRIC_FIELDS
    assert all(math.isnan(v) for v in rec.values())
    sweep, sol = run_pipeline(path4, [0], 2.0, 2.0)
    rec = metrics_record(evaluate(path4, sweep.best_cut, {0, 1}), sweep, sol)
    assert tuple(rec) == METRIC_FIELDS
    assert rec["p"] == 2.0 and rec["delta"] == 2.0 and rec["pushes"] == sol.pushes


def test_default_grid():
    assert default_delta_grid() == [2.0, 4.0, 8.0, 16.0, 32.0]


def test_delta_search_single_point_is_one_run(small_dumbbell):
    sweep, delta = delta_search(small_dumbbell, [10], 4.0, delta_grid=[5.0], rng_seed=0)
    ref, _ = run_pipeline(small_dumbbell, [10], 5.0, 4.0, rng_seed=0)
    assert delta == 5.0
    assert sweep.best_cut == ref.best_cut
    np.testing.assert_array_equal(sweep.profile, ref.profile)


def test_delta_search_dumbbell_bottleneck(small_dumbbell):
    # mass t * vol(left) for t in {2, 3, 5}; only t = 2 fits in the graph
    vol_left = small_dumbbell.volume(range(21))
    grid = [t * vol_left / 4 for t in (2, 3, 5)]
    with pytest.warns(UserWarning, match="skipping"):
        sweep, delta = delta_search(small_dumbbell, [10], 4.0, delta_grid=grid,
                                    rng_seed=0, budget=5_000_000)
    assert delta == grid[0]
    assert sweep.best_cut.members == set(range(21))
    assert sweep.best_conductance == pytest.approx(1 / vol_left)


def test_delta_search_tie_goes_to_smaller(path4):
    # both densities leave only the seed raised, so both score conductance 1
    sweep, delta = delta_search(path4, [0], 2.0, delta_grid=[2.0, 1.5])
    assert delta == 1.5 and sweep.best_conductance == 1.0


def test_delta_search_all_infeasible(path4):
    with pytest.raises(InfeasibleMassError):
        with pytest.warns(UserWarning):
            delta_search(path4, [0], 2.0, delta_grid=[10.0, 20.0])
