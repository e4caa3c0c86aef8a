from math import e, log, sqrt

import numpy as np
import pytest

from dronesim.ambiguity import (DiscreteDistribution, SampleSet, discrete_wasserstein, empirical_center,
                                eta_bound, inflate_radius, load_samples_csv, wasserstein_radius)
from dronesim.errors import ConfigurationError, ParameterError


@pytest.mark.parametrize("N, m, theta, c1, expected", [
    (4, 2, e ** -3, e, 1.0),
    (2, 2, e ** -3, e, sqrt(2.0)),
    (100, 2, 0.5, 2.0, sqrt(log(4) / 100)),
])
def test_radius_formula(N, m, theta, c1, expected):
    assert wasserstein_radius(N, m, theta, c1, 1.0, 2.0) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("theta", [0.0, 1.0, -0.1, 1.5])
def test_radius_rejects_bad_theta(theta):
    with pytest.raises(ParameterError):
        wasserstein_radius(10, 2, theta)


@pytest.mark.parametrize("eps, C, expected", [(1.0, 0, 1.0), (0.5, 1, 1.0), (0.1178, 2.5, 0.4123)])
def test_inflation(eps, C, expected):
    assert inflate_radius(eps, C) == pytest.approx(expected)


def test_inflation_rejects_negative():
    with pytest.raises(ParameterError):
        inflate_radius(-1.0, 0.0)


@pytest.mark.parametrize("eps, L, C, expected", [
    ((0.1, 0.2), (1, 1), 0, 0.4), ((0.1, 0.2), (3, 1), 0, 0.6), ((0.5,), (2,), 1, 4.0)])
def test_eta_bound(eps, L, C, expected):
    assert eta_bound(eps, L, C) == pytest.approx(expected)


def test_eta_bound_empty():
    with pytest.raises(ParameterError):
        eta_bound([], [])


def test_empirical_center():
    d = empirical_center(np.array([[0.0], [0.0]]))
    assert d.atoms.shape == (2, 1)
    np.testing.assert_allclose(d.weights, [0.5, 0.5])
    d = empirical_center(np.array([[1.0]]))
    np.testing.assert_allclose(d.weights, [1.0])
    with pytest.raises(ConfigurationError):
        empirical_center(np.zeros((0, 1)))


def test_wasserstein_examples():
    P = DiscreteDistribution([[0.0, 0.0]], [1.0])
    Q = DiscreteDistribution([[1.0, 2.0]], [1.0])
    assert discrete_wasserstein(P, P) == pytest.approx(0.0, abs=1e-12)
    assert discrete_wasserstein(P, Q) == pytest.approx(3.0)
    R = DiscreteDistribution([0.0, 2.0], [0.5, 0.5])
    assert discrete_wasserstein(R, DiscreteDistribution([1.0], [1.0])) == pytest.approx(1.0)


def test_bad_weights_rejected():
    with pytest.raises(ParameterError):
        DiscreteDistribution([0.0, 1.0], [0.7, 0.7])


def test_partition_must_cover():
    with pytest.raises(ConfigurationError):
        SampleSet(np.zeros((3, 2)), "shared", ((0, 1), (2, 3)))
    s = SampleSet(np.zeros((3, 2)), "shared", ((0, 1), (1, 2)))
    assert s.owned_slice(1) == slice(1, 2)


def test_load_samples_csv(tmp_path):
    p = tmp_path / "h.csv"
    p.write_text("a,b\n1,2\n3,4\n")
    header, H = load_samples_csv(p)
    assert header == ["a", "b"]
    np.testing.assert_array_equal(H, [[1, 2], [3, 4]])
    p.write_text("a,b\n1\n")
    with pytest.raises(ConfigurationError):
        load_samples_csv(p)
