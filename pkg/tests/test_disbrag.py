import numpy as np
import pytest

from dronesim.ambiguity import SampleSet
from dronesim.consensus import Digraph
from dronesim.disbrag import (DistributedIsbrag, build_local_problem, centralized_reference_solve,
                              distributed_solve, run_algorithm1)
from dronesim.dro import DroOracle, NominalOracle, dro_value
from dronesim.errors import ConfigurationError, SampleOutsideBoxError
from dronesim.game import Box, Game, PureProduct, Quadratic
from dronesim.isbrag import AlgoParams, IsbragState, isbrag_step, run_isbrag


def lin_game(n, m, agent_coords=None):
    """U_i = s_i * <g_i, xi> with g_i picking agent i's coordinate."""
    utils = []
    for i in range(n):
        g = np.zeros((1, m))
        g[0, (agent_coords or list(range(n)))[i]] = 1.0
        utils.append(Quadratic(i, 1.0, 0.5, xi_gain=g))
    return Game([Box(0.0, 1.0)] * n, utils, xi_box=Box(np.zeros(m), np.ones(m)))


#%% local problems

def test_local_problem_sizes():
    S = SampleSet(np.full((3, 2), 0.5), "shared", ((0, 1), (1, 2)))
    p = build_local_problem(0, Digraph.line(2), S, 0.1, Box([0, 0], [1, 1]))
    assert p.scenario_vectors == 2 * 3 and p.slacks == 2


def test_single_agent_has_no_neighbor_rows():
    S = SampleSet(np.full((3, 1), 0.5), "shared", ((0, 1),))
    p = build_local_problem(0, Digraph.cycle(1), S, 0.1, Box(0.0, 1.0))
    assert p.row_counts["neighbor_budget"] == 0 and p.in_neighbors == ()


def test_missing_range_and_outside_sample():
    S = SampleSet(np.full((3, 2), 0.5), "shared")
    with pytest.raises(ConfigurationError):
        build_local_problem(0, Digraph.line(2), S, 0.1, Box([0, 0], [1, 1]))
    H = np.array([[0.5, 0.5], [0.5, 1.5]])
    S = SampleSet(H, "shared", ((0, 1), (1, 2)))
    with pytest.raises(SampleOutsideBoxError) as exc:
        build_local_problem(1, Digraph.line(2), S, 0.1, Box([0, 0], [1, 1]))
    assert exc.value.coordinate == 1


#%% distributed solver

def _solve_both(game, graph, H, eps, part, s, T=3000):
    S = SampleSet(H, "shared", part)
    box = Box(np.zeros(H.shape[1]), np.ones(H.shape[1]))
    prof = game.profile(s)
    probs = [build_local_problem(i, graph, S, eps[i], box, prof) for i in range(game.n)]
    dist = distributed_solve(probs, graph, game.utilities, T)
    ref, total = centralized_reference_solve(game.utilities, [prof] * game.n, H, eps, box)
    return dist, ref, total


def test_single_agent_matches_dro_value(rng):
    g = lin_game(1, 1)
    H = rng.uniform(0, 1, (5, 1))
    dist, _, _ = _solve_both(g, Digraph.cycle(1), H, [0.1], ((0, 1),), [0.7])
    val, _ = dro_value(g.utilities[0], g.profile([0.7]), H, 0.1, Box(0.0, 1.0))
    assert dist.solutions[0].value == pytest.approx(val, abs=1e-4)


def test_two_agent_line_matches_reference(rng):
    g = lin_game(2, 2)
    H = rng.uniform(0, 1, (4, 2))
    dist, ref, total = _solve_both(g, Digraph.line(2), H, [0.1, 0.2], ((0, 1), (1, 2)), [0.3, 0.8])
    assert dist.objective == pytest.approx(total, abs=1e-3)
    assert dist.consensus_residual <= 1e-4


def test_zero_budget_reference():
    g = lin_game(2, 2)
    H = np.array([[0.2, 0.4], [0.6, 0.8]])
    sols, total = centralized_reference_solve(g.utilities, [g.profile([0.5, 0.5])] * 2, H, [0, 0],
                                              Box([0, 0], [1, 1]))
    for s in sols:
        np.testing.assert_array_equal(s.scenarios, H)


def test_reference_size_guard():
    g = lin_game(1, 1)
    with pytest.raises(ConfigurationError):
        centralized_reference_solve(g.utilities, [g.profile([0.5])], np.zeros((17, 1)), [0.1], Box(0.0, 1.0))


#%% d-ISBRAG

def test_preconverged_round_matches_centralized_step():
    g = Game([Box(-2.0, 2.0)] * 3, [PureProduct(i) for i in range(3)])
    p = AlgoParams.uniform(3, 0.1, 0.5, 1.0, 4.0, 1.0, d=4.0)
    s0 = [0.5, -1.0, 1.5]
    net = DistributedIsbrag(g, Digraph.complete(3), p, 300, NominalOracle(g), s0, seed=3)
    net.round()
    ref = isbrag_step(IsbragState.initial(s0), NominalOracle(g), p, g.boxes)
    np.testing.assert_allclose(net.s, ref.s.stacked, atol=1e-6)


def test_static_estimates_on_ring():
    g = Game([Box(-2.0, 2.0)] * 6, [PureProduct(i) for i in range(6)])
    p = AlgoParams.uniform(6, 0.1, 0.5, 1.0, 4.0, 1.0, d=4.0)
    s = np.array([0.3, -1.2, 1.9, 0.0, -0.5, 1.1])
    net = DistributedIsbrag(g, Digraph.cycle(6), p, 100, NominalOracle(g), s, seed=0)
    u = net.net.inputs(s)
    for _ in range(100):
        net.net.cons.step(u)
    est = net.net.read(s)
    assert np.abs(est - s[None, :]).max() <= 1e-2


#%% Algorithm 1

def test_algorithm1_zero_radius_matches_centralized():
    g = lin_game(2, 2)
    H = np.array([[0.2, 0.9], [0.6, 0.3], [0.4, 0.5]])
    S = SampleSet(H, "shared", ((0, 1), (1, 2)))
    box = Box([0, 0], [1, 1])
    p = AlgoParams.uniform(2, 0.1, 0.5, 0.7, 4.0, 2.0, d=1.0)
    tr = run_algorithm1(g, Digraph.complete(2), p, S, [0.0, 0.0], box, [0.1, 0.9], 30, 200, 2000)
    ref = run_isbrag(g, DroOracle(g, S, [0.0, 0.0], [box] * 2), p, [0.1, 0.9], 30)
    assert np.abs(tr.S - ref.S).max() <= 1e-3


def test_algorithm1_zero_horizon():
    g = lin_game(2, 2)
    S = SampleSet(np.full((2, 2), 0.5), "shared", ((0, 1), (1, 2)))
    p = AlgoParams.uniform(2, 0.1, 0.5, 0.7, 4.0, 2.0, d=1.0)
    tr = run_algorithm1(g, Digraph.line(2), p, S, [0.1, 0.1], Box([0, 0], [1, 1]), [0.2, 0.4], 0, 10, 10)
    np.testing.assert_array_equal(tr.S, [[0.2, 0.4]])
