import io
from collections import deque

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from specrad.graph import (
    EdgeRef,
    GraphFormatError,
    GraphValidationError,
    SparseAdjacency,
    load_edge_list,
    relative_frobenius_distance,
    strongly_connected_components,
    symmetrize,
    write_edge_list,
)

from conftest import graphs, random_graph


def reachable(M, s):
    seen = {s}
    todo = deque([s])
    while todo:
        i = todo.popleft()
        for j in np.flatnonzero(M[i]):
            if j not in seen:
                seen.add(int(j))
                todo.append(int(j))
    return seen


def brute_force_components(M):
    n = M.shape[0]
    reach = [reachable(M, i) for i in range(n)]
    return {frozenset(j for j in reach[i] if i in reach[j]) for i in range(n)}


def test_from_coo_sorts_rows_and_columns():
    A = SparseAdjacency.from_coo(3, [2, 0, 0], [1, 2, 1], [3.0, 2.0, 1.0])
    assert A.row_offsets.tolist() == [0, 2, 2, 3]
    assert A.col_indices.tolist() == [1, 2, 1]
    assert A.weights.tolist() == [1.0, 2.0, 3.0]


@pytest.mark.parametrize(
    "rows, cols, w",
    [([0, 0], [1, 1], [1, 2]), ([1], [1], [1.0]), ([0], [1], [-1.0]), ([0], [1], [0.0]), ([0], [5], [1.0])],
)
def test_from_coo_rejects_bad_input(rows, cols, w):
    with pytest.raises(GraphValidationError):
        SparseAdjacency.from_coo(3, rows, cols, w)


def test_arrays_are_read_only():
    A = SparseAdjacency.from_coo(2, [0], [1], [1.0])
    with pytest.raises(ValueError):
        A.weights[0] = 5.0


def test_weight_lookup_and_update():
    A = SparseAdjacency.from_coo(3, [0, 1, 2], [1, 2, 0], [1.0, 2.0, 3.0])
    assert A.weight(1, 2) == 2.0 and A.weight(2, 1) == 0.0
    B = A.with_weight(1, 2, 0.5)
    assert B.weight(1, 2) == 0.5 and A.weight(1, 2) == 2.0
    C = A.with_weight(1, 2, 0.0)
    assert C.m == 2 and not C.has_edge(1, 2)
    D = A.with_weight(2, 1, 4.0)
    assert D.m == 4 and D.weight(2, 1) == 4.0


def test_edge_ref_rejects_self_loop():
    with pytest.raises(GraphValidationError):
        EdgeRef(1, 1, 1.0)


@given(graphs(max_n=15, connected=False))
def test_scc_matches_brute_force_reachability(A):
    M = A.toarray()
    expected = brute_force_components(M)
    rep = strongly_connected_components(A)
    got = {}
    for i, c in enumerate(rep.component_of.tolist()):
        got.setdefault(c, set()).add(i)
    assert {frozenset(s) for s in got.values()} == expected
    assert rep.component_count == len(expected)
    assert rep.is_irreducible == (len(expected) == 1 and A.n > 1)


def test_scc_labels_follow_first_appearance():
    A = SparseAdjacency.from_coo(4, [0, 1, 2, 3], [1, 0, 3, 2])
    assert strongly_connected_components(A).component_of.tolist() == [0, 0, 1, 1]


def test_single_node_is_reducible():
    A = SparseAdjacency.from_coo(1, [], [], [])
    assert not strongly_connected_components(A).is_irreducible


@given(graphs(max_n=10, connected=False))
def test_symmetrize_is_symmetric_and_averages(A):
    S = symmetrize(A)
    M = A.toarray()
    assert np.allclose(S.toarray(), (M + M.T) / 2)
    assert S.is_symmetric()


def test_relative_frobenius_distance():
    M1 = np.array([[0, 3.0], [4.0, 0]])
    M2 = np.array([[0, 3.0], [0, 0]])
    assert relative_frobenius_distance(M1, M2) == pytest.approx(4 / 5)
    assert relative_frobenius_distance(SparseAdjacency.from_dense(M1), M1) == 0.0
    with pytest.raises(ValueError):
        relative_frobenius_distance(np.zeros((2, 2)), M1)
    with pytest.raises(ValueError):
        relative_frobenius_distance(M1, np.zeros((3, 3)))


@given(graphs(max_n=12, connected=False), st.sampled_from(["tsv-edges", "matrix-market"]), st.sampled_from([0, 1]))
def test_write_then_load_round_trips_exactly(A, fmt, base):
    buf = io.StringIO()
    write_edge_list(A, buf, fmt, base)
    B, dropped = load_edge_list(io.StringIO(buf.getvalue()), fmt, base)
    assert dropped == 0
    assert A == B


def test_tsv_parsing_details():
    text = "# comment\n1 2 0.5\n2\t3\n\n3 1 2 # trailing\n3 3 7\n"
    A, dropped = load_edge_list(io.StringIO(text))
    assert dropped == 1
    assert A.n == 3 and A.m == 3
    assert A.weight(0, 1) == 0.5 and A.weight(1, 2) == 1.0 and A.weight(2, 0) == 2.0


def test_tsv_zero_based_and_explicit_n():
    A, _ = load_edge_list(io.StringIO("0 1\n1 0\n"), index_base=0, n=4)
    assert A.n == 4 and A.m == 2


@pytest.mark.parametrize(
    "text, exc, line",
    [
        ("1 2\n1 2 3 4\n", GraphFormatError, 2),
        ("1 2 abc\n", GraphFormatError, 1),
        ("1 x\n", GraphFormatError, 1),
        ("1 2 nan\n", GraphFormatError, 1),
    ],
)
def test_tsv_errors_carry_line_numbers(text, exc, line):
    with pytest.raises(exc) as info:
        load_edge_list(io.StringIO(text))
    assert info.value.lineno == line


@pytest.mark.parametrize("text", ["1 2 -1\n", "1 2 0\n", "0 1\n", "1 2\n1 2\n"])
def test_tsv_validation_errors(text):
    with pytest.raises(GraphValidationError):
        load_edge_list(io.StringIO(text))


def test_matrix_market_symmetric_and_pattern():
    text = "%%MatrixMarket matrix coordinate real symmetric\n% c\n3 3 2\n2 1 1.5\n3 2 2.5\n"
    A, _ = load_edge_list(io.StringIO(text), "matrix-market")
    assert A.is_symmetric() and A.m == 4 and A.weight(0, 1) == 1.5
    text = "%%MatrixMarket matrix coordinate pattern general\n2 2 1\n1 2\n"
    A, _ = load_edge_list(io.StringIO(text), "matrix-market")
    assert A.weight(0, 1) == 1.0


@pytest.mark.parametrize(
    "text",
    [
        "%%MatrixMarket matrix array real general\n2 2\n1\n",
        "%%MatrixMarket matrix coordinate complex general\n2 2 1\n1 2 1 0\n",
        "not a header\n",
        "%%MatrixMarket matrix coordinate real general\n2 2 1\n1 2\n",
    ],
)
def test_matrix_market_format_errors(text):
    with pytest.raises(GraphFormatError):
        load_edge_list(io.StringIO(text), "matrix-market")


def test_matrix_market_rejects_non_square():
    text = "%%MatrixMarket matrix coordinate real general\n2 3 1\n1 2 1\n"
    with pytest.raises(GraphValidationError):
        load_edge_list(io.StringIO(text), "matrix-market")


def test_load_from_path(tmp_path, rng):
    A = random_graph(rng, 8)
    p = tmp_path / "g.tsv"
    write_edge_list(A, p)
    B, _ = load_edge_list(str(p))
    assert A == B


@given(graphs(max_n=10))
def test_inf_and_frobenius_norms(A):
    M = A.toarray()
    assert A.inf_norm() == pytest.approx(np.abs(M).sum(axis=1).max())
    assert A.frobenius_norm() == pytest.approx(np.linalg.norm(M))
    assert np.array_equal(A.transpose().toarray(), M.T)
