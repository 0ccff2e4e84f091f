import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from beastal.graph import NodeKind, Topology, build_topology, incidence_matrix, pseudo_inverse


def test_single_layer_edge_order():
    tp = build_topology(2, 2)
    assert tp.edges == ((0, 2), (1, 2), (0, 3), (1, 3), (2, 4), (3, 4))
    assert tp.n_edges == (2 + 1) * 2
    assert tp.ground == 4


def test_hidden_layer_blocks():
    tp = build_topology(2, 3, hidden=True)
    assert tp.n_hidden == 3
    assert list(tp.hidden) == [2, 3, 4]
    assert list(tp.outputs) == [5, 6, 7]
    assert tp.n_edges == 2 * 3 + 3 * 3 + 3
    assert tp.edges[:2] == ((0, 2), (1, 2))
    assert tp.edges[6:9] == ((2, 5), (3, 5), (4, 5))
    assert tp.edges[-1] == (7, 8)


def test_node_kinds():
    tp = build_topology(1, 1, hidden=True)
    assert [tp.kind(n) for n in range(tp.n_nodes)] == [
        NodeKind.INPUT, NodeKind.HIDDEN, NodeKind.OUTPUT, NodeKind.GROUND]
    with pytest.raises(IndexError):
        tp.kind(4)


def test_incidence_signs(chain):
    U = incidence_matrix(chain)
    np.testing.assert_array_equal(U, [[1, -1, 0], [0, 1, -1]])
    np.testing.assert_array_equal(U.sum(axis=1), 0)


@pytest.mark.parametrize("n_in,n_out", [(0, 1), (1, 0), (-1, 2)])
def test_rejects_empty_layers(n_in, n_out):
    with pytest.raises(ValueError):
        build_topology(n_in, n_out)


def test_rejects_bad_edges():
    with pytest.raises(ValueError):
        Topology(1, 0, 1, ((0, 5),))
    with pytest.raises(ValueError):
        Topology(1, 0, 1, ((1, 1),))


def test_json_round_trip():
    tp = build_topology(3, 2, hidden=True)
    back = Topology.from_json(tp.to_json())
    assert back == tp
    assert set(tp.to_dict()) == {"n_inputs", "n_hidden", "n_outputs", "edges"}


def test_chain_pseudo_inverse_by_hand(chain):
    # minimum-norm solution of U w = v: the null space is the constant vector
    v = np.array([0.05, -0.05])
    w = chain.incidence_pinv @ v
    np.testing.assert_allclose(w, [1 / 60, -1 / 30, 1 / 60], atol=1e-15)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.booleans())
def test_moore_penrose_identities(n_in, n_out, hidden):
    tp = build_topology(n_in, n_out, hidden)
    U, P = tp.incidence, pseudo_inverse(tp.incidence)
    tol = 1e-10
    np.testing.assert_allclose(U @ P @ U, U, atol=tol)
    np.testing.assert_allclose(P @ U @ P, P, atol=tol)
    np.testing.assert_allclose((U @ P).T, U @ P, atol=tol)
    np.testing.assert_allclose((P @ U).T, P @ U, atol=tol)
    # outputs of U+ are orthogonal to the constant null vector
    np.testing.assert_allclose(P.sum(axis=0), 0, atol=tol)


def test_single_layer_projection_rank():
    # single-output networks are trees, so every drop pattern is realisable
    for n_in, n_out in [(1, 1), (4, 1)]:
        tp = build_topology(n_in, n_out)
        np.testing.assert_allclose(tp.incidence @ tp.incidence_pinv, np.eye(tp.n_edges), atol=1e-10)
    for n_in, n_out in [(1, 4), (3, 2)]:
        tp = build_topology(n_in, n_out)
        assert np.linalg.matrix_rank(tp.incidence @ tp.incidence_pinv) == tp.n_nodes - 1 < tp.n_edges
