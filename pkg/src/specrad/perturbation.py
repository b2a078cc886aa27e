"""Worst-case perturbations of the Perron root and structured condition numbers.

For a simple Perron root with unit right/left vectors ``u``, ``v`` and a
perturbation ``E`` of unit norm,

    rho(A + eps E) - rho(A) ~= eps * (v^T E u) / (v^T u).

``E = v u^T`` maximizes the right-hand side over all unit-norm ``E``.
Restricting ``v u^T`` to a sparsity pattern, or averaging its two
off-diagonals into a tridiagonal Toeplitz matrix, and renormalizing gives
the maximizer within that structure.  Both restrictions are orthogonal
projections, so ``v^T E u`` equals the Frobenius norm of the projected
``v u^T``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator

from .eigen import PerronPair, SolverOptions, perron_pair, perron_pair_operator
from .graph import SparseAdjacency
from .toeplitz import TridiagToeplitz, toeplitz_perron

KINDS = (
    "wilkinson",
    "sparsity_structured",
    "toeplitz_structured",
    "ones",
    "ones_sparsity_structured",
)

_UNIT_TOL = 1e-8
_DEFECTIVE = 1e-14
HEATMAP_MAX_N = 2000


class DefectiveRootError(ValueError):
    """Raised when v^T u is too small for a meaningful condition number."""


@dataclass(frozen=True)
class Rank1Perturbation:
    """``E = left @ right.T``, kept in factored form."""

    left: np.ndarray
    right: np.ndarray

    @property
    def n(self) -> int:
        return int(self.left.size)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self.left * float(self.right @ x)

    def rmatvec(self, x: np.ndarray) -> np.ndarray:
        return self.right * float(self.left @ x)

    def entry(self, h: int, k: int) -> float:
        return float(self.left[h] * self.right[k])

    def frobenius_norm(self) -> float:
        return float(np.linalg.norm(self.left) * np.linalg.norm(self.right))

    def toarray(self) -> np.ndarray:
        return np.outer(self.left, self.right)


def _check_unit(x, name: str) -> np.ndarray:
    x = np.asarray(x, dtype=float).ravel()
    if abs(np.linalg.norm(x) - 1.0) > _UNIT_TOL:
        raise ValueError(f"{name} must have unit norm (got {np.linalg.norm(x):.3e})")
    if np.any(x < 0):
        raise ValueError(f"{name} must be nonnegative")
    return x


def wilkinson_matrix(u, v) -> Rank1Perturbation:
    """``E = v u^T`` for unit nonnegative Perron vectors."""
    u = _check_unit(u, "u")
    v = _check_unit(v, "v")
    if u.size != v.size:
        raise ValueError("u and v must have the same length")
    return Rank1Perturbation(v, u)


def _entries(E, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    if isinstance(E, Rank1Perturbation):
        return E.left[rows] * E.right[cols]
    if sp.issparse(E):
        return np.asarray(sp.csr_matrix(E)[rows, cols]).ravel()
    return np.asarray(E, dtype=float)[rows, cols]


def project_to_sparsity(E, pattern: SparseAdjacency) -> SparseAdjacency:
    """Keep the entries of ``E`` on ``pattern``'s support, then scale to unit
    Frobenius norm.

    Positions where ``E`` vanishes are left out of the result, since a
    stored weight must be positive.
    """
    if pattern.m == 0:
        raise ValueError("sparsity pattern is empty")
    rows, cols = pattern.rows, pattern.col_indices
    vals = _entries(E, rows, cols)
    norm = float(np.linalg.norm(vals))
    if norm == 0:
        raise ValueError("perturbation vanishes on the sparsity pattern")
    keep = vals != 0
    return SparseAdjacency.from_coo(pattern.n, rows[keep], cols[keep], vals[keep] / norm)


def _toeplitz_means(E, n: int) -> tuple[float, float]:
    """Means of the super- and subdiagonal of ``E``."""
    i = np.arange(n - 1)
    return float(np.mean(_entries(E, i, i + 1))), float(np.mean(_entries(E, i + 1, i)))


def project_to_toeplitz(E, n: int) -> TridiagToeplitz:
    """Average each off-diagonal of ``E`` and scale to unit Frobenius norm."""
    if n < 2:
        raise ValueError("n must be at least 2")
    sup, sub = _toeplitz_means(E, n)
    norm = math.sqrt((n - 1) * (sup * sup + sub * sub))
    if norm == 0:
        raise ValueError("perturbation vanishes on both off-diagonals")
    return TridiagToeplitz(n, sub / norm, sup / norm)


def structured_condition_number(u, v, structure: str = "plain", pattern: SparseAdjacency | None = None) -> float:
    """``||P(v u^T)||_F / (v^T u)`` with ``P`` the projection onto ``structure``.

    ``structure`` is "plain" (no projection), "pattern" (needs ``pattern``)
    or "toeplitz" (tridiagonal Toeplitz with zero diagonal).
    """
    u = np.asarray(u, dtype=float).ravel()
    v = np.asarray(v, dtype=float).ravel()
    vu = float(v @ u)
    if vu <= _DEFECTIVE:
        raise DefectiveRootError(f"numerically defective Perron root (v^T u = {vu:.3e})")
    E = Rank1Perturbation(v, u)
    if structure == "plain":
        num = E.frobenius_norm()
    elif structure == "pattern":
        if pattern is None:
            raise ValueError("structure 'pattern' needs a sparsity pattern")
        num = float(np.linalg.norm(_entries(E, pattern.rows, pattern.col_indices)))
    elif structure == "toeplitz":
        n = u.size
        sup, sub = _toeplitz_means(E, n)
        num = math.sqrt((n - 1) * (sup * sup + sub * sub))
    else:
        raise ValueError(f"unknown structure {structure!r}")
    return num / vu


def ones_substitute(n: int, structure: str = "plain", pattern: SparseAdjacency | None = None):
    """Unit-norm constant perturbation, used when Perron vectors are unknown.

    "plain" gives ``e e^T`` with ``e = ones / sqrt(n)``; "pattern" gives
    ``1 / sqrt(m)`` on each of the ``m`` stored positions of ``pattern``.
    """
    if n < 1:
        raise ValueError("n must be positive")
    if structure == "plain":
        e = np.full(n, 1.0 / math.sqrt(n))
        return Rank1Perturbation(e, e.copy())
    if structure == "pattern":
        if pattern is None or pattern.m == 0:
            raise ValueError("structure 'pattern' needs a nonempty sparsity pattern")
        if pattern.n != n:
            raise ValueError("pattern size does not match n")
        return SparseAdjacency.from_coo(
            n, pattern.rows, pattern.col_indices, np.full(pattern.m, 1.0 / math.sqrt(pattern.m))
        )
    raise ValueError(f"unknown structure {structure!r}")


# -- perturbed Perron roots ----------------------------------------------------------


@dataclass(frozen=True)
class PerturbationSpec:
    kind: str
    epsilon: float

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown perturbation kind {self.kind!r}; choose from {', '.join(KINDS)}")
        # epsilon = 0 is accepted as the identity perturbation
        if not (math.isfinite(self.epsilon) and self.epsilon >= 0):
            raise ValueError(f"epsilon must be nonnegative, got {self.epsilon}")


@dataclass(frozen=True)
class StructuredConditionReport:
    kind: str
    epsilon: float
    rho: float
    rho_perturbed: float
    kappa_plain: float
    kappa_structured: float
    predicted_increase: float
    measured_increase: float

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "epsilon": self.epsilon,
            "rho": self.rho,
            "rho_perturbed": self.rho_perturbed,
            "kappa_plain": self.kappa_plain,
            "kappa_structured": self.kappa_structured,
            "predicted_increase": self.predicted_increase,
            "measured_increase": self.measured_increase,
        }


def build_perturbation(A, pair: PerronPair, kind: str):
    """The unit perturbation of the given kind for ``A`` with Perron pair ``pair``.

    Returns a :class:`Rank1Perturbation`, a :class:`SparseAdjacency` or a
    :class:`TridiagToeplitz`.
    """
    n = A.n
    if kind == "wilkinson":
        return wilkinson_matrix(pair.u, pair.v)
    if kind == "ones":
        return ones_substitute(n)
    if kind == "toeplitz_structured":
        return project_to_toeplitz(Rank1Perturbation(pair.v, pair.u), n)
    pattern = A.to_adjacency() if isinstance(A, TridiagToeplitz) else A
    if kind == "sparsity_structured":
        return project_to_sparsity(Rank1Perturbation(pair.v, pair.u), pattern)
    if kind == "ones_sparsity_structured":
        return ones_substitute(n, "pattern", pattern)
    raise ValueError(f"unknown perturbation kind {kind!r}")


def _bilinear(E, v: np.ndarray, u: np.ndarray) -> float:
    """``v^T E u``."""
    if isinstance(E, (Rank1Perturbation, TridiagToeplitz)):
        return float(v @ E.matvec(u))
    return float(v @ E.to_csr().dot(u))


def _add(A, eps: float, E):
    """``A + eps E`` as a Toeplitz model, a sparse graph or a linear operator."""
    if isinstance(A, TridiagToeplitz) and isinstance(E, TridiagToeplitz):
        return TridiagToeplitz(A.n, A.t_sub + eps * E.t_sub, A.t_super + eps * E.t_super)
    base = A.to_adjacency() if isinstance(A, TridiagToeplitz) else A
    M = base.to_csr()
    if isinstance(E, Rank1Perturbation):
        Mt = M.T.tocsr()
        left, right = E.left, E.right
        op = LinearOperator(
            M.shape,
            matvec=lambda x: M.dot(x) + eps * left * float(right @ x),
            rmatvec=lambda x: Mt.dot(x) + eps * right * float(left @ x),
            dtype=float,
        )
        bound = base.inf_norm() + eps * float(left.max()) * float(right.sum())
        return op, bound
    other = E.to_adjacency() if isinstance(E, TridiagToeplitz) else E
    return SparseAdjacency.from_scipy(M + eps * other.to_csr())


def _perron(A, opts: SolverOptions) -> PerronPair:
    if isinstance(A, TridiagToeplitz):
        return toeplitz_perron(A)
    return perron_pair(A, opts)


def perturbed_perron(
    A,
    spec: PerturbationSpec,
    opts: SolverOptions | None = None,
    pair: PerronPair | None = None,
) -> tuple[PerronPair, StructuredConditionReport]:
    """Perron pair of ``A + eps E`` and a first-order versus measured comparison.

    ``A`` is a :class:`SparseAdjacency` or a :class:`TridiagToeplitz`;
    ``pair`` may carry a precomputed Perron pair of ``A``.  Rank-1 kinds are
    applied through products only.
    """
    opts = opts or SolverOptions()
    pair = pair or _perron(A, opts)
    E = build_perturbation(A, pair, spec.kind)
    vu = float(pair.v @ pair.u)
    if vu <= _DEFECTIVE:
        raise DefectiveRootError(f"numerically defective Perron root (v^T u = {vu:.3e})")
    kappa_structured = _bilinear(E, pair.v, pair.u) / vu
    if spec.epsilon == 0:
        new = pair
    else:
        target = _add(A, spec.epsilon, E)
        if isinstance(target, tuple):
            op, bound = target
            new = perron_pair_operator(op, opts, norm_bound=bound, reducible=pair.reducible)
        else:
            new = _perron(target, opts)
    report = StructuredConditionReport(
        kind=spec.kind,
        epsilon=spec.epsilon,
        rho=pair.rho,
        rho_perturbed=new.rho,
        kappa_plain=pair.kappa,
        kappa_structured=kappa_structured,
        predicted_increase=spec.epsilon * kappa_structured,
        measured_increase=new.rho - pair.rho,
    )
    return new, report


# -- heatmaps ---------------------------------------------------------------------


def perturbation_dense(E) -> np.ndarray:
    if isinstance(E, Rank1Perturbation):
        return E.toarray()
    if isinstance(E, TridiagToeplitz):
        return E.to_adjacency().toarray()
    if isinstance(E, SparseAdjacency):
        return E.toarray()
    return np.asarray(E, dtype=float)


def log10_heatmap(E) -> np.ndarray:
    """``log10`` of the entries of ``E`` as a dense grid; zeros map to -inf."""
    n = E.n if hasattr(E, "n") else np.asarray(E).shape[0]
    if n > HEATMAP_MAX_N:
        raise ValueError(f"heatmap export is limited to n <= {HEATMAP_MAX_N} (got {n})")
    with np.errstate(divide="ignore"):
        return np.log10(np.abs(perturbation_dense(E)))


def write_heatmap_csv(grid: np.ndarray, dest) -> None:
    """Row-major CSV, one matrix row per line."""
    own = isinstance(dest, (str, bytes)) or hasattr(dest, "__fspath__")
    f = open(dest, "w", newline="") if own else dest
    try:
        w = csv.writer(f)
        for row in grid:
            w.writerow([repr(float(x)) for x in row])
    finally:
        if own:
            f.close()
