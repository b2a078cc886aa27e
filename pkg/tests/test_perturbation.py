import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from specrad.eigen import perron_pair
from specrad.graph import SparseAdjacency
from specrad.perturbation import (
    KINDS,
    DefectiveRootError,
    PerturbationSpec,
    Rank1Perturbation,
    build_perturbation,
    log10_heatmap,
    ones_substitute,
    perturbed_perron,
    project_to_sparsity,
    project_to_toeplitz,
    structured_condition_number,
    wilkinson_matrix,
    write_heatmap_csv,
)
from specrad.toeplitz import TridiagToeplitz, toeplitz_perron

from conftest import dense_perron, graphs, random_graph


def test_wilkinson_examples():
    h = 2**-0.5
    assert np.allclose(wilkinson_matrix([h, h], [h, h]).toarray(), 0.5)
    E = wilkinson_matrix([1.0, 0.0], [0.0, 1.0]).toarray()
    assert E.tolist() == [[0.0, 0.0], [1.0, 0.0]]


def test_wilkinson_validation():
    with pytest.raises(ValueError):
        wilkinson_matrix([1.0, 1.0], [1.0, 0.0])
    with pytest.raises(ValueError):
        wilkinson_matrix([-1.0, 0.0], [1.0, 0.0])


def test_wilkinson_corner_for_nonnormal_toeplitz():
    p = toeplitz_perron(TridiagToeplitz(10, 0.1, 1.0))
    E = wilkinson_matrix(p.u, p.v).toarray()
    assert np.unravel_index(np.argmax(E), E.shape) == (9, 0)


def test_rank1_operator_matches_dense(rng):
    E = Rank1Perturbation(rng.random(7), rng.random(7))
    D = E.toarray()
    x = rng.normal(size=7)
    assert np.allclose(E.matvec(x), D @ x) and np.allclose(E.rmatvec(x), D.T @ x)
    assert E.entry(3, 5) == D[3, 5]
    assert E.frobenius_norm() == pytest.approx(np.linalg.norm(D))


def test_sparsity_projection_examples():
    u = np.full(4, 0.5)
    full = SparseAdjacency.from_dense(np.ones((4, 4)) - np.eye(4))
    P = project_to_sparsity(Rank1Perturbation(u, u), full).toarray()
    assert np.allclose(P, (np.ones((4, 4)) - np.eye(4)) / math.sqrt(12))
    single = SparseAdjacency.from_coo(4, [2], [1], [5.0])
    assert project_to_sparsity(Rank1Perturbation(u, u), single).toarray()[2, 1] == 1.0


def test_sparsity_projection_on_short_path():
    # vectors of the symmetric 3-path: (1/2, 1/sqrt 2, 1/2)
    u = np.array([0.5, 2**-0.5, 0.5])
    pattern = SparseAdjacency.from_coo(3, [0, 1], [1, 2], [1.0, 1.0])
    P = project_to_sparsity(Rank1Perturbation(u, u), pattern).toarray()
    vals = np.array([u[0] * u[1], u[1] * u[2]])
    assert np.allclose([P[0, 1], P[1, 2]], vals / np.linalg.norm(vals))


def test_sparsity_projection_errors():
    with pytest.raises(ValueError):
        project_to_sparsity(np.ones((2, 2)), SparseAdjacency.from_coo(2, [], [], []))
    with pytest.raises(ValueError):
        project_to_sparsity(np.zeros((2, 2)), SparseAdjacency.from_coo(2, [0], [1], [1.0]))


def test_toeplitz_projection_examples():
    n = 6
    e = np.full(n, 1 / math.sqrt(n))
    T = project_to_toeplitz(Rank1Perturbation(e, e), n)
    assert T.t_sub == pytest.approx(1 / math.sqrt(2 * (n - 1)))
    assert T.t_super == pytest.approx(T.t_sub)
    h = 2**-0.5
    T = project_to_toeplitz(Rank1Perturbation(np.array([h, h]), np.array([h, h])), 2)
    assert T.t_sub == pytest.approx(h) and T.t_super == pytest.approx(h)
    p = toeplitz_perron(TridiagToeplitz(25, 1.5, 0.5))
    T = project_to_toeplitz(Rank1Perturbation(p.v, p.u), 25)
    D = np.outer(p.v, p.u)
    assert T.t_super / T.t_sub == pytest.approx(np.mean(np.diag(D, 1)) / np.mean(np.diag(D, -1)), rel=1e-12)
    # super / sub = t_sub / t_super: the weight sits opposite the dominant diagonal
    assert T.t_super / T.t_sub == pytest.approx(3.0, rel=1e-12)
    assert (T.n - 1) * (T.t_sub**2 + T.t_super**2) == pytest.approx(1.0)


def test_toeplitz_projection_of_dense_input():
    M = np.arange(16, dtype=float).reshape(4, 4)
    T = project_to_toeplitz(M, 4)
    sup, sub = np.mean(np.diag(M, 1)), np.mean(np.diag(M, -1))
    norm = math.sqrt(3 * (sup**2 + sub**2))
    assert T.t_super == pytest.approx(sup / norm) and T.t_sub == pytest.approx(sub / norm)


def test_ones_substitute():
    assert np.allclose(ones_substitute(2).toarray(), 0.5)
    pattern = TridiagToeplitz(5, 1, 1).to_adjacency()
    S = ones_substitute(5, "pattern", pattern)
    assert np.allclose(S.weights, 1 / math.sqrt(8))
    # on the Toeplitz support it is the Toeplitz projection of uniform vectors
    e = np.full(5, 1 / math.sqrt(5))
    T = project_to_toeplitz(Rank1Perturbation(e, e), 5)
    assert np.allclose(S.toarray(), T.to_adjacency().toarray())
    with pytest.raises(ValueError):
        ones_substitute(3, "pattern")


def test_condition_numbers_examples():
    p = perron_pair(TridiagToeplitz(12, 1, 1).to_adjacency())
    assert structured_condition_number(p.u, p.v) == pytest.approx(1.0, abs=1e-9)
    u = np.array([1.0, 0.0])
    v = np.array([0.0, 1.0])
    with pytest.raises(DefectiveRootError, match="numerically defective"):
        structured_condition_number(u, v)
    with pytest.raises(ValueError):
        structured_condition_number(p.u, p.v, "pattern")


@given(st.integers(2, 40), st.floats(0.05, 3), st.floats(0.05, 3))
def test_projection_dominance_on_toeplitz(n, a, b):
    T = TridiagToeplitz(n, a, b)
    p = toeplitz_perron(T)
    if p.v @ p.u <= 1e-14:
        return
    k = structured_condition_number(p.u, p.v)
    kS = structured_condition_number(p.u, p.v, "pattern", T.to_adjacency())
    kT = structured_condition_number(p.u, p.v, "toeplitz")
    assert kT <= kS * (1 + 1e-10) and kS <= k * (1 + 1e-10)


@given(graphs(max_n=12), st.sampled_from(KINDS))
def test_unit_norms(A, kind):
    p = perron_pair(A)
    E = build_perturbation(A, p, kind)
    if isinstance(E, Rank1Perturbation):
        assert np.linalg.norm(E.toarray(), 2) == pytest.approx(1.0, rel=1e-9)
    elif isinstance(E, TridiagToeplitz):
        assert np.linalg.norm(E.to_adjacency().toarray()) == pytest.approx(1.0)
    else:
        assert E.frobenius_norm() == pytest.approx(1.0)


@given(graphs(max_n=12), st.sampled_from(KINDS), st.floats(1e-3, 1.0))
def test_report_invariants(A, kind, eps):
    new, rep = perturbed_perron(A, PerturbationSpec(kind, eps))
    assert rep.kappa_structured <= rep.kappa_plain * (1 + 1e-10)
    assert rep.predicted_increase >= 0
    assert rep.measured_increase >= -1e-9
    assert rep.rho_perturbed == new.rho
    assert rep.measured_increase == pytest.approx(new.rho - rep.rho)


@given(graphs(max_n=12), st.sampled_from(KINDS), st.floats(1e-3, 1.0))
def test_implicit_matches_dense_formation(A, kind, eps):
    p = perron_pair(A)
    new, _ = perturbed_perron(A, PerturbationSpec(kind, eps), pair=p)
    E = build_perturbation(A, p, kind)
    if isinstance(E, Rank1Perturbation):
        D = E.toarray()
    elif isinstance(E, TridiagToeplitz):
        D = E.to_adjacency().toarray()
    else:
        D = E.toarray()
    rho, _, _ = dense_perron(A.toarray() + eps * D)
    assert new.rho == pytest.approx(rho, abs=1e-10 * max(1, rho))


def test_perturbation_keeps_positivity_for_wilkinson(rng):
    A = random_graph(rng, 10)
    p = perron_pair(A)
    E = build_perturbation(A, p, "wilkinson")
    assert np.all(A.toarray() + 0.1 * E.toarray() > 0)


def test_zero_epsilon_is_identity(rng):
    A = random_graph(rng, 10)
    p = perron_pair(A)
    new, rep = perturbed_perron(A, PerturbationSpec("wilkinson", 0.0), pair=p)
    assert new is p and rep.measured_increase == 0


@pytest.mark.parametrize("kind", KINDS)
def test_second_order_error(kind, rng):
    A = random_graph(rng, 40, 0.15)
    p = perron_pair(A)
    eps = np.array([1e-1, 1e-2, 1e-3, 1e-4])
    err = []
    for e in eps:
        _, rep = perturbed_perron(A, PerturbationSpec(kind, e), pair=p)
        err.append(abs(rep.measured_increase - rep.predicted_increase))
    slope = np.polyfit(np.log10(eps), np.log10(err), 1)[0]
    assert 1.7 <= slope <= 2.3


def test_toeplitz_input_uses_closed_form():
    T = TridiagToeplitz(25, 1.5, 0.5)
    new, rep = perturbed_perron(T, PerturbationSpec("toeplitz_structured", 0.01))
    assert new.iterations == 0
    sparse, rep2 = perturbed_perron(T.to_adjacency(), PerturbationSpec("toeplitz_structured", 0.01))
    assert new.rho == pytest.approx(sparse.rho, rel=1e-10)
    assert rep.kappa_structured == pytest.approx(rep2.kappa_structured, rel=1e-8)


@pytest.mark.parametrize("kind, eps", [("bogus", 0.1), ("wilkinson", -0.1), ("ones", math.nan)])
def test_spec_validation(kind, eps):
    with pytest.raises(ValueError):
        PerturbationSpec(kind, eps)


def test_heatmap(tmp_path):
    p = toeplitz_perron(TridiagToeplitz(10, 0.1, 1.0))
    E = wilkinson_matrix(p.u, p.v)
    grid = log10_heatmap(E)
    assert grid.shape == (10, 10)
    assert np.allclose(10**grid, E.toarray())
    out = tmp_path / "h.csv"
    write_heatmap_csv(grid, out)
    back = np.loadtxt(out, delimiter=",")
    assert np.array_equal(back, grid)
    S = log10_heatmap(TridiagToeplitz(4, 1, 1).to_adjacency())
    assert np.isneginf(S[0, 0])
    with pytest.raises(ValueError):
        log10_heatmap(Rank1Perturbation(np.ones(2001), np.ones(2001)))
