import numpy as np
import pytest

from dronesim.errors import ConfigurationError, DimensionError, NonDifferentiableError
from dronesim.game import (Box, Game, IntervalSet, Profile, PureProduct, Quadratic, UserUtility,
                           WeightedAbsProduct, eta_ne_residual, project_box)

TARGETS = (0.25, 0.5, 0.75, 1.0, 1.25, 1.5)


def case1_game():
    return Game([Box(0.0, 2.0)] * 6, [WeightedAbsProduct(i, c) for i, c in enumerate(TARGETS)])


#%% utilities

def test_weighted_abs_at_kink_is_zero():
    g = case1_game()
    assert g.utility(0, [0.25, 1, 1, 1, 1, 1]) == 0.0


def test_pure_product_value():
    g = Game([Box(-2.0, 2.0)] * 6, [PureProduct(i) for i in range(6)])
    assert g.utility(3, [2.0] * 6) == 64.0


def test_affine_in_xi_value():
    u = Quadratic(0, xi_gain=[[1.0]])
    g = Game([Box(0.0, 2.0)], [u], xi_box=Box(-1.0, 1.0))
    assert g.utility(0, [1.0], [0.5]) == pytest.approx(0.5)


def test_dimension_mismatch_names_agent():
    g = Game([Box([0, 0], [1, 1]), Box(0, 1)],
             [Quadratic(0, 1.0, [0.5, 0.5]), Quadratic(1, 1.0, 0.5)])
    with pytest.raises(DimensionError) as exc:
        g.utility(0, Profile(([0.5], [0.5])))
    assert exc.value.agent == 0


#%% supergradients

def test_quadratic_gradient():
    g = Game([Box(0.0, 2.0)], [Quadratic(0, 1.0, 1.0)])
    sg = g.supergradient(0, [0.5])
    assert sg.is_singleton and sg.lower[0] == pytest.approx(1.0)


def test_weighted_abs_kink_interval():
    # K = 2 from the opponent product
    g = Game([Box(0.0, 2.0), Box(0.0, 2.0)], [WeightedAbsProduct(0, 1.0), WeightedAbsProduct(1, 1.0)])
    sg = g.supergradient(0, [1.0, 2.0])
    np.testing.assert_allclose([sg.lower[0], sg.upper[0]], [-2.0, 2.0])
    sg = g.supergradient(0, [2.0, 2.0])
    assert sg.is_singleton and sg.lower[0] == -2.0


def test_nonsmooth_family_refuses_gradient():
    u = WeightedAbsProduct(0, 1.0)
    with pytest.raises(NonDifferentiableError):
        u.grad_own(Profile(([1.0], [1.0])))


def test_nonconcave_user_utility_rejected():
    u = UserUtility(0, lambda s, xi: float(s[0][0] ** 2), lambda s, xi: IntervalSet.point(2 * s[0]),
                    lipschitz=0.0, supergrad_bound=2.0)
    with pytest.raises(ConfigurationError):
        Game([Box(-1.0, 1.0)], [u])


def test_negative_opponent_box_rejected_for_abs_family():
    with pytest.raises(ConfigurationError):
        Game([Box(-1.0, 1.0), Box(-1.0, 1.0)], [WeightedAbsProduct(0, 0.0), WeightedAbsProduct(1, 0.0)])


#%% projection

@pytest.mark.parametrize("x, expected", [((3, -1), (2, 0)), ((1, 1), (1, 1)), ((0, 2), (0, 2))])
def test_project_box(x, expected):
    np.testing.assert_array_equal(project_box(np.array(x, dtype=float), Box([0, 0], [2, 2])), expected)


def test_box_faces():
    b = Box([0, 0, 1], [2, 2, 1])
    np.testing.assert_array_equal(b.faces([0.0, 1.0, 1.0]), [-1, 0, 2])


#%% eta residual

def test_eta_residual_zero_at_case1_equilibrium():
    g = case1_game()
    s = Profile.from_stacked(np.array(TARGETS), g.dims)
    res = eta_ne_residual(lambda i, p: g.utility(i, p), s, g.boxes, 201)
    assert res.max() <= 1e-12


def test_eta_residual_single_agent():
    g = Game([Box(0.0, 2.0)], [Quadratic(0, 1.0, 1.0)])
    ev = lambda i, p: g.utility(i, p)
    assert eta_ne_residual(ev, Profile(([1.0],)), g.boxes)[0] == 0.0
    assert eta_ne_residual(ev, Profile(([0.0],)), g.boxes)[0] == pytest.approx(1.0)


def test_eta_residual_wraps_failures():
    from dronesim.errors import EvaluationError

    def boom(i, p):
        raise RuntimeError("no")

    with pytest.raises(EvaluationError) as exc:
        eta_ne_residual(boom, Profile(([0.0],)), [Box(0.0, 1.0)])
    assert exc.value.agent == 0


def test_declared_amicability_and_bounds():
    g = Game([Box(-2.0, 2.0)] * 2, [PureProduct(i) for i in range(2)])
    np.testing.assert_allclose(g.amicability(), [1.0, 1.0])
    np.testing.assert_allclose(g.supergrad_bounds, [2.0, 2.0])
