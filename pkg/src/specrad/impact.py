"""Which single edge to weaken to lower the spectral radius the most.

Lowering edge h -> k by a fraction eps of its weight changes the matrix by
``eps * (-a_hk e_h e_k^T)``.  To first order the relative decrease of the
Perron root is

    s_hk ~= alpha_hk * eps * kappa / rho,   alpha_hk = a_hk v_h u_k,

and for a symmetric matrix where both directions are lowered together,
``alpha_hk = 2 a_hk u_h u_k`` and ``s_hk ~= alpha_hk * eps / rho``.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .eigen import PerronPair, ReducibleMatrixWarning, SolverOptions, perron_pair
from .graph import EdgeRef, GraphValidationError, SparseAdjacency, strongly_connected_components

# relative gap below which two alphas count as tied
TIE_RTOL = 1e-9


class ReducibleGraphError(ValueError):
    """The operation needs a strongly connected graph."""


@dataclass(frozen=True)
class EdgeImpact:
    edge: EdgeRef
    alpha: float
    first_order_impact: float
    exact_impact: float | None = None
    preserves_irreducibility: bool | None = None

    def to_dict(self, index_base: int = 1) -> dict:
        return {
            "h": self.edge.h + index_base,
            "k": self.edge.k + index_base,
            "weight": self.edge.weight,
            "alpha": self.alpha,
            "first_order_impact": self.first_order_impact,
            "exact_impact": self.exact_impact,
            "preserves_irreducibility": self.preserves_irreducibility,
        }


@dataclass(frozen=True)
class InterventionPlan:
    ranked: list[EdgeImpact]
    mode: str
    epsilon: float
    symmetric_mode: bool = False
    rho: float = math.nan
    warnings: list[str] = field(default_factory=list)

    def __post_init__(self):
        if self.mode not in ("remove", "downweight"):
            raise ValueError(f"mode must be 'remove' or 'downweight', got {self.mode!r}")
        if not 0 < self.epsilon <= 1:
            raise ValueError(f"epsilon must lie in (0, 1], got {self.epsilon}")

    def to_dict(self, index_base: int = 1) -> dict:
        return {
            "mode": self.mode,
            "epsilon": self.epsilon,
            "symmetric_mode": self.symmetric_mode,
            "rho": self.rho,
            "warnings": list(self.warnings),
            "ranked": [e.to_dict(index_base) for e in self.ranked],
        }


def _check_epsilon(epsilon: float) -> None:
    if epsilon > 1:
        raise ValueError("perturbation would create negative weight (epsilon > 1)")
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")


def edge_impacts_first_order(
    A: SparseAdjacency, pair: PerronPair, epsilon: float, symmetric_mode: bool = False
) -> list[EdgeImpact]:
    """First-order impact of lowering each edge by ``epsilon`` times its weight.

    In symmetric mode there is one entry per unordered pair, reported as
    (h, k) with h < k.  Results follow the storage order of ``A``.
    """
    if pair.rho <= 0:
        raise ValueError("first-order impacts need a positive spectral radius")
    h, k, w = A.rows, A.col_indices, A.weights
    if symmetric_mode:
        if not A.is_symmetric():
            raise GraphValidationError("symmetric mode needs a symmetric matrix")
        upper = h < k
        h, k, w = h[upper], k[upper], w[upper]
        alpha = 2.0 * w * pair.u[h] * pair.u[k]
        scale = epsilon / pair.rho
    else:
        alpha = w * pair.v[h] * pair.u[k]
        scale = epsilon * pair.kappa / pair.rho
    with np.errstate(invalid="ignore"):
        est = alpha * scale
    return [
        EdgeImpact(EdgeRef(hh, kk, ww), a, e)
        for hh, kk, ww, a, e in zip(h.tolist(), k.tolist(), w.tolist(), alpha.tolist(), est.tolist())
    ]


def rank_edges(impacts: list[EdgeImpact], rtol: float = TIE_RTOL) -> list[EdgeImpact]:
    """Sort by alpha descending; alphas within ``rtol`` of each other are tied
    and ordered by (h, k)."""
    order = sorted(impacts, key=lambda e: (-e.alpha, e.edge.h, e.edge.k))
    ranked: list[EdgeImpact] = []
    group: list[EdgeImpact] = []
    top = 0.0
    for e in order:
        if group and e.alpha < top - rtol * abs(top):
            ranked.extend(sorted(group, key=lambda g: (g.edge.h, g.edge.k)))
            group = []
        if not group:
            top = e.alpha
        group.append(e)
    ranked.extend(sorted(group, key=lambda g: (g.edge.h, g.edge.k)))
    return ranked


def downweight(A: SparseAdjacency, edge: EdgeRef, epsilon: float, symmetric_mode: bool = False) -> SparseAdjacency:
    """Copy of ``A`` with the edge (and its reverse in symmetric mode) scaled by
    ``1 - epsilon``; ``epsilon = 1`` removes it."""
    _check_epsilon(epsilon)
    pairs = [(edge.h, edge.k)]
    if symmetric_mode:
        pairs.append((edge.k, edge.h))
    out = A
    for h, k in pairs:
        w = A.weight(h, k)
        if w == 0:
            raise GraphValidationError(f"edge ({h}, {k}) is not in the graph")
        out = out.with_weight(h, k, 0.0 if epsilon == 1 else (1.0 - epsilon) * w)
    return out


def exact_impact(
    A: SparseAdjacency,
    edge: EdgeRef,
    epsilon: float,
    symmetric_mode: bool = False,
    opts: SolverOptions | None = None,
    rho: float | None = None,
) -> tuple[float, float]:
    """Relative decrease ``(rho - rho_new) / rho`` and ``rho_new``.

    ``rho`` may pass a known Perron root of ``A`` to skip one solve.
    """
    opts = opts or SolverOptions()
    B = downweight(A, edge, epsilon, symmetric_mode)
    if rho is None:
        rho = perron_pair(A, opts).rho
    with warnings.catch_warnings():
        # lowering an edge may legitimately break strong connectivity
        warnings.simplefilter("ignore", ReducibleMatrixWarning)
        new = perron_pair(B, opts).rho
    return (rho - new) / rho, new


def preserves_irreducibility(A: SparseAdjacency, edge: EdgeRef, symmetric_mode: bool = False) -> bool:
    """Whether removing the edge keeps the graph strongly connected."""
    return strongly_connected_components(downweight(A, edge, 1.0, symmetric_mode)).is_irreducible


def recommend_interventions(
    A: SparseAdjacency,
    pair: PerronPair,
    top_k: int,
    mode: str = "remove",
    epsilon: float = 1.0,
    require_irreducible: bool = True,
    exact_rescore: bool = False,
    symmetric_mode: bool = False,
    opts: SolverOptions | None = None,
    threads: int = 1,
    allow_reducible: bool = False,
) -> InterventionPlan:
    """Top ``top_k`` edges by alpha, optionally checked and rescored.

    In remove mode ``epsilon`` is forced to 1.  With ``require_irreducible``
    each candidate whose removal breaks strong connectivity is flagged and
    moved below every candidate that keeps it.  ``exact_rescore`` runs one
    eigensolve per candidate, spread over ``threads`` workers.
    """
    if top_k < 1:
        raise ValueError("top_k must be at least 1")
    if mode == "remove":
        epsilon = 1.0
    _check_epsilon(epsilon)
    notes = []
    if not strongly_connected_components(A).is_irreducible:
        if not allow_reducible:
            raise ReducibleGraphError("graph is not strongly connected; Perron vectors are not unique")
        notes.append("graph is reducible; ranking uses one of several Perron vector pairs")
    ranked = rank_edges(edge_impacts_first_order(A, pair, epsilon, symmetric_mode))[:top_k]
    if mode == "remove" and require_irreducible:
        ranked = [
            replace(e, preserves_irreducibility=preserves_irreducibility(A, e.edge, symmetric_mode))
            for e in ranked
        ]
        keep = [e for e in ranked if e.preserves_irreducibility]
        ranked = keep + [e for e in ranked if not e.preserves_irreducibility]
        if len(keep) < len(ranked):
            notes.append("some candidate removals make the graph reducible")
    elif mode == "downweight":
        ranked = [replace(e, preserves_irreducibility=True) for e in ranked]
    if exact_rescore:
        def rescore(e: EdgeImpact) -> EdgeImpact:
            s, _ = exact_impact(A, e.edge, epsilon, symmetric_mode, opts, rho=pair.rho)
            return replace(e, exact_impact=s)

        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                ranked = list(pool.map(rescore, ranked))
        else:
            ranked = [rescore(e) for e in ranked]
    return InterventionPlan(ranked, mode, epsilon, symmetric_mode, pair.rho, notes)


# -- output -------------------------------------------------------------------

CSV_FIELDS = ("h", "k", "weight", "alpha", "first_order_impact", "exact_impact", "preserves_irreducibility")


def write_plan_csv(plan: InterventionPlan, dest, index_base: int = 1, fmt: Callable[[float], str] = repr) -> None:
    """One row per ranked edge; missing optional values are left empty."""
    w = csv.writer(dest, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for e in plan.ranked:
        d = e.to_dict(index_base)
        row = []
        for name in CSV_FIELDS:
            x = d[name]
            if x is None:
                row.append("")
            elif isinstance(x, bool):
                row.append(str(x).lower())
            elif isinstance(x, float):
                row.append(fmt(x))
            else:
                row.append(str(x))
        w.writerow(row)


def plan_json(plan: InterventionPlan, index_base: int = 1) -> str:
    return json.dumps(plan.to_dict(index_base), indent=2)
