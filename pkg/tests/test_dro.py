import numpy as np
import pytest

from dronesim.dro import (DroOracle, dro_supergradient, dro_value, individual_dro_value,
                          min_norm_supergradient, project_l1_box, solve_scenarios)
from dronesim.ambiguity import SampleSet
from dronesim.errors import ConvergenceError, NonDifferentiableError, SampleOutsideBoxError
from dronesim.game import Box, Game, IntervalSet, Profile, Quadratic, WeightedAbsProduct


def linear(agent=0):
    return Quadratic(agent, xi_gain=[[1.0]])


def prof(*x):
    return Profile(tuple([v] for v in x))


#%% values

def test_zero_radius_is_sample_average(rng):
    u = Quadratic(0, 1.0, 0.3, xi_gain=[[1.0, -2.0]], xi_offset=[0.5, 0.1])
    H = rng.uniform(-1, 1, (7, 2))
    s = prof(0.4)
    val, sol = dro_value(u, s, H, 0.0, (np.full(2, -1.0), np.full(2, 1.0)))
    assert abs(val - np.mean([u.value(s, h) for h in H])) <= 1e-12
    np.testing.assert_array_equal(sol.scenarios, H)


@pytest.mark.parametrize("s, value, scen", [(1.0, 0.5, 0.5), (-1.0, -1.5, 1.5)])
def test_one_sample_linear_worst_case(s, value, scen):
    val, sol = dro_value(linear(), prof(s), [[1.0]], 0.5, Box(0.0, 2.0))
    assert val == pytest.approx(value, abs=1e-6)
    assert sol.scenarios[0, 0] == pytest.approx(scen, abs=1e-6)


def test_two_sample_budget():
    val, _ = individual_dro_value(linear(), prof(1.0), [[0.0], [2.0]], 0.5, Box(0.0, 2.0))
    assert val == pytest.approx(0.5, abs=1e-6)


def test_sample_outside_box_names_index():
    with pytest.raises(SampleOutsideBoxError) as exc:
        dro_value(linear(), prof(1.0), [[0.5], [3.0]], 0.1, Box(0.0, 2.0))
    assert exc.value.index == 1


def test_nonconvergence_reports_gap():
    H = np.array([[0.5, 0.5], [0.2, 0.8]])
    target = np.array([[0.9, 0.1], [0.7, 0.3]])

    def objective(Y):
        return float(np.sum((Y - target) ** 2)), 2 * (Y - target)

    with pytest.raises(ConvergenceError) as exc:
        solve_scenarios(objective, H, 0.3, 0.0, 1.0, tol=1e-12, max_iters=2)
    assert exc.value.gap is not None and exc.value.gap > 0


#%% supergradients

def test_supergradient_examples():
    _, sol = dro_value(linear(), prof(1.0), [[1.0]], 0.5, Box(0.0, 2.0))
    assert dro_supergradient(linear(), prof(1.0), sol)[0] == pytest.approx(0.5, abs=1e-6)
    _, sol = dro_value(linear(), prof(1.0), [[0.0], [2.0]], 0.0, Box(0.0, 2.0))
    assert dro_supergradient(linear(), prof(1.0), sol)[0] == pytest.approx(1.0)


def test_tracking_utility_stationary():
    # U = -(s - xi)^2 up to terms constant in s
    u = Quadratic(0, 1.0, 0.0, xi_gain=[[2.0]])
    _, sol = dro_value(u, prof(1.0), [[1.0]], 0.0, Box(0.0, 2.0))
    assert dro_supergradient(u, prof(1.0), sol)[0] == pytest.approx(0.0)


def test_supergradient_refuses_nonsmooth():
    u = WeightedAbsProduct(0, 1.0)
    _, sol = dro_value(u, prof(1.0, 1.0), [[0.0]], 0.0, Box(0.0, 1.0))
    with pytest.raises(NonDifferentiableError):
        dro_supergradient(u, prof(1.0, 1.0), sol)


@pytest.mark.parametrize("superset, faces, expected", [
    (IntervalSet.point([1.5]), [0], [1.5]),
    (IntervalSet([-3.0], [1.0]), [0], [0.0]),
    (IntervalSet.point([5.0]), [1], [5.0]),
    (IntervalSet.point([-5.0]), [1], [-5.0]),
    (IntervalSet([-3.0], [-1.0]), [-1], [-1.0]),
])
def test_min_norm_examples(superset, faces, expected):
    np.testing.assert_allclose(min_norm_supergradient(superset, faces), expected)


def test_min_norm_empty_rejected():
    from dronesim.errors import ConfigurationError
    with pytest.raises(ConfigurationError):
        IntervalSet([], [])


#%% projection

def test_projection_feasible_and_optimal(rng):
    for _ in range(50):
        c = rng.uniform(0, 1, 6)
        y = rng.normal(0, 2, 6)
        r = rng.uniform(0, 2)
        x = project_l1_box(y, c, r, 0.0, 1.0)
        assert np.abs(x - c).sum() <= r + 1e-9
        assert np.all((x >= -1e-12) & (x <= 1 + 1e-12))
        # no random feasible point is closer
        for _ in range(20):
            z = project_l1_box(c + rng.normal(0, 1, 6), c, r, 0.0, 1.0)
            assert np.linalg.norm(y - x) <= np.linalg.norm(y - z) + 1e-9


#%% oracle

def test_oracle_matches_closed_form_on_individual_samples():
    g = Game([Box(0.0, 1.0)] * 2, [linear(0), linear(1)], xi_box=[Box(0.0, 2.0)] * 2)
    S = SampleSet([np.array([[1.0]]), np.array([[1.5]])], "individual")
    o = DroOracle(g, S, [0.5, 0.25], [Box(0.0, 2.0)] * 2)
    v = o(prof(0.5, 0.5))
    np.testing.assert_allclose([v[0][0], v[1][0]], [0.5, 1.25], atol=1e-6)
