from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scmalab.graph import (
    GraphConstructionError,
    GraphDimensionError,
    build_regular_factor_graph,
    from_matrix,
    mapping_matrix,
    neighborhoods,
)

F_4x6 = np.array(
    [
        [1, 1, 1, 0, 0, 0],
        [1, 0, 0, 1, 1, 0],
        [0, 1, 0, 1, 0, 1],
        [0, 0, 1, 0, 1, 1],
    ]
)


def test_4x6_matrix_exact():
    g = build_regular_factor_graph(4, 6, 2)
    np.testing.assert_array_equal(g.F, F_4x6)
    assert (g.d_v, g.d_f) == (2, 3)
    assert g.overloading == pytest.approx(1.5)


def test_single_edge():
    g = build_regular_factor_graph(1, 1, 1)
    np.testing.assert_array_equal(g.F, [[1]])
    assert g.d_f == 1
    assert neighborhoods(g) == (((0,),), ((0,),))
    np.testing.assert_array_equal(mapping_matrix(g, 0), [[1]])


def test_6x15_all_pairs():
    g = build_regular_factor_graph(6, 15, 2)
    assert g.d_f == 5
    cols = {tuple(np.flatnonzero(g.F[:, j])) for j in range(15)}
    assert cols == set(combinations(range(6), 2))
    assert np.all(g.F.sum(axis=1) == 5)


def test_neighborhoods_4x6():
    xi, zeta = neighborhoods(build_regular_factor_graph(4, 6, 2))
    # resource 2 carries users 1, 4, 5; user 1 sits on resources 1, 2
    assert xi[1] == (0, 3, 4)
    assert zeta[0] == (0, 1)
    assert all(list(s) == sorted(s) for s in xi + zeta)


@pytest.mark.parametrize(
    "j, rows",
    [(0, (0, 1)), (1, (0, 2)), (2, (0, 3)), (3, (1, 2)), (4, (1, 3)), (5, (2, 3))],
)
def test_mapping_matrices(j, rows):
    g = build_regular_factor_graph(4, 6, 2)
    V = mapping_matrix(g, j)
    expected = np.eye(4, dtype=int)[:, list(rows)]
    np.testing.assert_array_equal(V, expected)
    np.testing.assert_array_equal(np.diag(V @ V.T), g.F[:, j])


def test_mapping_matrix_out_of_range():
    g = build_regular_factor_graph(4, 6, 2)
    with pytest.raises(IndexError):
        mapping_matrix(g, 6)


@pytest.mark.parametrize("K, J, dv", [(4, 5, 2), (3, 4, 3), (0, 1, 1), (4, 7, 2)])
def test_infeasible_dimensions(K, J, dv):
    with pytest.raises(GraphDimensionError):
        build_regular_factor_graph(K, J, dv)


def test_non_regular_prefix_names_row():
    # first 4 pairs of {1..4}: resource 1 appears three times
    with pytest.raises(GraphConstructionError, match="row"):
        build_regular_factor_graph(4, 4, 2)


@pytest.mark.parametrize(
    "F, msg",
    [
        ([[1, 2], [1, 0]], "only 0 and 1"),
        ([[1, 1, 0], [1, 0, 1]], "column"),
        ([[1, 1], [1, 1], [0, 0]], "row"),
        ([[1, 1], [1, 1]], "distinct"),
    ],
)
def test_from_matrix_rejects(F, msg):
    with pytest.raises((GraphConstructionError, GraphDimensionError), match=msg):
        from_matrix(np.array(F))


def test_determinism_and_equality():
    a = build_regular_factor_graph(4, 6, 2)
    b = build_regular_factor_graph(4, 6, 2)
    assert a == b and hash(a) == hash(b)
    assert a.F.tobytes() == b.F.tobytes()


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 7), st.integers(1, 3))
def test_full_subset_graphs_are_regular(K, dv):
    from math import comb

    if dv > K:
        return
    J = comb(K, dv)
    g = build_regular_factor_graph(K, J, dv)
    assert g.F.sum() == J * dv == K * g.d_f
    for j in range(J):
        np.testing.assert_array_equal(np.diag(mapping_matrix(g, j) @ mapping_matrix(g, j).T), g.F[:, j])
