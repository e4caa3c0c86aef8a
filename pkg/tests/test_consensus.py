import numpy as np
import pytest

from dronesim.consensus import (ConsensusGains, ConsensusState, Digraph, scaled_input_for_owner,
                                stability_radius, tracking_error)
from dronesim.errors import ConfigurationError


def test_equal_inputs_fixed_point():
    st = ConsensusState(Digraph.cycle(5), width=1, u0=np.full(5, 0.7))
    for _ in range(100):
        st.step(np.full(5, 0.7))
    assert np.array_equal(st.x, np.full((5, 1), 0.7))


def test_single_node_passes_input():
    st = ConsensusState(Digraph.cycle(1), width=1, u0=[0.3])
    st.step([1.25])
    assert st.x[0, 0] == 1.25


def test_two_node_average():
    st = ConsensusState(Digraph.cycle(2), width=1, u0=[0.0, 2.0])
    for _ in range(200):
        st.step([0.0, 2.0])
    assert tracking_error(st.x, [[0.0], [2.0]]) <= 1e-3


def test_tracking_error_example():
    assert tracking_error([1.1, 0.9], [0.0, 2.0]) == pytest.approx(0.1)
    assert tracking_error([1.0, 1.0], [0.0, 2.0]) == 0.0


def test_owner_scaling():
    assert scaled_input_for_owner(6, 0.5) == 3.0
    assert scaled_input_for_owner(6, 0.0) == 0.0
    u = np.array([3.0, 0, 0, 0, 0, 0])
    assert u.mean() == 0.5


def test_unbalanced_graph_rejected():
    A = np.array([[0, 1, 1], [1, 0, 0], [0, 1, 0]], dtype=float)
    with pytest.raises(ConfigurationError):
        Digraph(A)


def test_disconnected_graph_rejected():
    with pytest.raises(ConfigurationError):
        Digraph(np.zeros((3, 3)))


def test_file_format(tmp_path):
    p = tmp_path / "g.txt"
    p.write_text("# ring\n1 2 1\n2 3\n3 1 1.0\n")
    g = Digraph.from_file(p)
    # node 2 hears node 1
    assert g.in_neighbors(1) == [0]
    p.write_text("1 x\n")
    with pytest.raises(ConfigurationError):
        Digraph.from_file(p)


def test_default_gains_stable_on_ring():
    assert stability_radius(Digraph.cycle(6), ConsensusGains()) < 1


def test_divergent_gains_rejected():
    with pytest.raises(ConfigurationError):
        ConsensusState(Digraph.cycle(6), ConsensusGains(5.0, 5.0, 5.0))
