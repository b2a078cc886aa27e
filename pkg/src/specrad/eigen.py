"""Perron roots and vectors of nonnegative matrices, plus small oracles.

The default solver is power iteration on ``A + cI`` with ``c = ||A||_inf / 2``.
For a nonnegative matrix the shift makes the Perron root the unique
eigenvalue of largest modulus (it breaks the +/- rho pairs of bipartite
graphs) without changing eigenvectors.  When power iteration stalls, the
current iterate seeds a Krylov-Schur (thick restart Arnoldi) iteration.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse import csgraph
from scipy.sparse.linalg import LinearOperator, aslinearoperator

from .graph import SparseAdjacency, relative_frobenius_distance, strongly_connected_components

log = logging.getLogger(__name__)

__all__ = [
    "ConvergenceError",
    "PerronPair",
    "ReducibleMatrixWarning",
    "SolverOptions",
    "bhatia_spectral_distance",
    "perron_pair",
    "perron_pair_operator",
    "spectral_norm_lower_bound_check",
    "sturm_tridiag_eigenvalues",
]

# tiny negatives from rounding are clamped to zero after sign normalization
_CLAMP = 1e-13
_STALL_WINDOW = 50
_STALL_RATIO = 0.99
_STALL_HORIZON = 500
# inner tolerances below a few ulps only chase rounding noise
_INNER_FLOOR = 4 * np.finfo(float).eps


class ReducibleMatrixWarning(UserWarning):
    pass


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-10
    max_iterations: int = 100_000
    shift: float | str = "auto"
    subspace_dim: int = 20

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.subspace_dim < 2:
            raise ValueError("subspace_dim must be >= 2")
        if self.shift != "auto" and not (isinstance(self.shift, (int, float)) and self.shift >= 0):
            raise ValueError("shift must be 'auto' or a nonnegative number")


@dataclass(frozen=True)
class PerronPair:
    """Perron root with unit nonnegative right (u) and left (v) vectors."""

    rho: float
    u: np.ndarray
    v: np.ndarray
    kappa: float
    residual_right: float
    residual_left: float
    iterations: int
    converged: bool
    reducible: bool = False

    def to_dict(self, vectors: bool = False) -> dict:
        d = {
            "rho": self.rho,
            "kappa": self.kappa,
            "residual_right": self.residual_right,
            "residual_left": self.residual_left,
            "iterations": self.iterations,
            "converged": self.converged,
            "reducible": self.reducible,
        }
        if vectors:
            d["u"] = self.u.tolist()
            d["v"] = self.v.tolist()
        return d


class ConvergenceError(RuntimeError):
    """Solver ran out of iterations; ``best`` holds the last iterate."""

    def __init__(self, message: str, best: PerronPair):
        super().__init__(message)
        self.best = best


# -- helpers ------------------------------------------------------------------


def _sign_normalize(x: np.ndarray) -> np.ndarray:
    x = np.real(x).astype(np.float64, copy=True)
    nrm = np.linalg.norm(x)
    if nrm == 0:
        return x
    x /= nrm
    if x[np.argmax(np.abs(x))] < 0:
        x = -x
    x[(x < 0) & (x >= -_CLAMP)] = 0.0
    return x


def _condition(u: np.ndarray, v: np.ndarray) -> float:
    vu = float(v @ u)
    if vu <= 0:
        return math.inf
    return 1.0 / vu


def _as_operator(A) -> tuple[LinearOperator, float]:
    """Linear operator for ``A`` and an upper bound on ``||A||_inf``."""
    if isinstance(A, SparseAdjacency):
        M = A.to_csr()
        return aslinearoperator(M), A.inf_norm()
    if sp.issparse(A):
        M = sp.csr_matrix(A)
        return aslinearoperator(M), float(abs(M).sum(axis=1).max()) if M.shape[0] else 0.0
    if isinstance(A, np.ndarray):
        return aslinearoperator(A), float(np.abs(A).sum(axis=1).max())
    raise TypeError(f"cannot build an operator from {type(A).__name__}")


# -- core iterations ------------------------------------------------------------


@dataclass
class _Dominant:
    theta: float
    x: np.ndarray
    residual: float
    iterations: int
    converged: bool


def _stalled(history: list[float], target: float) -> bool:
    """True when the residual contraction over the last window is too slow.

    Besides the plain "< 1% improvement over the window" test, the observed
    rate is extrapolated and the iteration counts as stalled when reaching
    ``target`` would take more than ``_STALL_HORIZON`` further steps.
    """
    now, then = history[-1], history[-1 - _STALL_WINDOW]
    if now > _STALL_RATIO * then:
        return True
    rate = math.log(now / then) / _STALL_WINDOW
    return math.log(target / now) / rate > _STALL_HORIZON


def _power_iteration(
    matvec: Callable, shift: float, tol: float, max_it: int, x: np.ndarray, detect_stall: bool = True
) -> tuple[_Dominant, bool]:
    """Power iteration on ``A + shift*I``.  Returns (result, stalled)."""
    x = x / np.linalg.norm(x)
    history = []
    theta, res = 0.0, math.inf
    it = 0
    for it in range(1, max_it + 1):
        y = matvec(x)
        theta = float(x @ y)
        res = float(np.linalg.norm(y - theta * x))
        if res <= tol * max(1.0, abs(theta)):
            return _Dominant(theta, x, res, it, True), False
        history.append(res)
        if detect_stall and it >= 2 * _STALL_WINDOW and it % _STALL_WINDOW == 0:
            if _stalled(history, tol * max(1.0, abs(theta))):
                return _Dominant(theta, x, res, it, False), True
        z = y + shift * x
        nz = np.linalg.norm(z)
        if nz == 0 or not np.isfinite(nz):
            return _Dominant(theta, x, res, it, False), True
        x = z / nz
    return _Dominant(theta, x, res, it, False), False


def _krylov_schur(
    matvec: Callable, n: int, tol: float, max_matvecs: int, m: int, x0: np.ndarray
) -> _Dominant:
    """Krylov-Schur iteration for the eigenvalue of largest real part.

    Keeps about half of the Schur vectors of the projected matrix at each
    restart, reordered so the wanted Ritz values lead.
    """
    m = max(2, min(m, n))
    keep = max(1, m // 2)
    V = np.zeros((n, m + 1))
    H = np.zeros((m + 1, m))
    V[:, 0] = x0 / np.linalg.norm(x0)
    k = 0
    matvecs = 0
    best: _Dominant | None = None
    eps = np.finfo(float).eps
    while True:
        size = m
        for j in range(k, m):
            w = matvec(V[:, j])
            matvecs += 1
            basis = V[:, : j + 1]
            h = basis.T @ w
            w = w - basis @ h
            # second Gram-Schmidt pass keeps the basis orthonormal
            h2 = basis.T @ w
            w = w - basis @ h2
            h += h2
            H[: j + 1, j] = h
            beta = float(np.linalg.norm(w))
            H[j + 1, j] = beta
            if beta <= eps * max(1.0, float(np.linalg.norm(H[: j + 2, : j + 1]))):
                size = j + 1
                H[j + 1, j] = 0.0
                break
            V[:, j + 1] = w / beta
        Hm = H[:size, :size]
        evals, evecs = np.linalg.eig(Hm)
        i = int(np.argmax(evals.real))
        theta = float(evals[i].real)
        y = evecs[:, i]
        y = y / np.linalg.norm(y)
        est = float(abs(H[size, :size] @ y))
        exhausted = matvecs >= max_matvecs
        if est <= tol * max(1.0, abs(theta)) or size < m or exhausted:
            x = _sign_normalize(V[:, :size] @ y)
            ax = matvec(x)
            matvecs += 1
            theta = float(x @ ax)
            res = float(np.linalg.norm(ax - theta * x))
            cand = _Dominant(theta, x, res, matvecs, res <= tol * max(1.0, abs(theta)))
            if best is None or cand.residual < best.residual:
                best = cand
            if cand.converged or exhausted or size < m:
                best.iterations = matvecs
                return best
            # the projected residual estimate drifted; restart from the Ritz vector
            V[:, 0] = x
            H[:] = 0.0
            k = 0
            continue
        # thick restart: reorder the Schur form so the largest real parts lead
        order = np.sort(evals.real)[::-1]
        want = keep
        sdim = 0
        T = Z = None
        while want >= 1:
            cut = order[want - 1]
            try:
                T, Z, sdim = sla.schur(Hm, output="real", sort=lambda re, im, c=cut: re >= c)
            except sla.LinAlgError:
                # reordering failed on clustered values; keep fewer vectors
                sdim = 0
            if 0 < sdim < m - 1:
                break
            want -= 1
        if not 0 < sdim < m - 1:
            V[:, 0] = _sign_normalize(V[:, :size] @ y)
            H[:] = 0.0
            k = 0
            continue
        k = int(sdim)
        b = H[size, :size] @ Z[:, :k]
        V[:, :k] = V[:, :size] @ Z[:, :k]
        V[:, k] = V[:, size]
        H[:] = 0.0
        H[:k, :k] = T[:k, :k]
        H[k, :k] = b


def _dominant(
    matvec: Callable, n: int, shift: float, tol: float, budget: int, subspace_dim: int, x0: np.ndarray
) -> _Dominant:
    """Power iteration, handing over to Krylov-Schur when progress stalls."""
    res, stalled = _power_iteration(matvec, shift, tol, budget, x0)
    if res.converged or not stalled or res.iterations >= budget:
        return res
    log.debug("power iteration stalled after %d steps (residual %.3e); switching to Krylov-Schur",
              res.iterations, res.residual)
    # a strictly positive start keeps every Perron component in the Krylov space
    start = np.abs(res.x) + 1e-3 * np.linalg.norm(res.x) / math.sqrt(n)
    ks = _krylov_schur(matvec, n, tol, max(budget - res.iterations, 1), subspace_dim, start)
    ks.iterations += res.iterations
    if not ks.converged and ks.residual > res.residual:
        res.iterations = ks.iterations
        return res
    return ks


# -- balancing ----------------------------------------------------------------------

# stop rescaling once the balanced Perron root is this well conditioned
_BALANCED_KAPPA = 4.0
_MAX_BALANCE_ROUNDS = 30
_LOG_FLOOR = math.log(1e-300)


def _rescale(M: sp.csr_matrix, logd: np.ndarray) -> sp.csr_matrix | None:
    """D^-1 M D with D = diag(exp(logd)), or None if entries overflow."""
    coo = M.tocoo()
    expo = logd[coo.col] - logd[coo.row]
    if expo.size and expo.max() > 700:
        return None
    data = coo.data * np.exp(expo)
    if not np.all(np.isfinite(data)):
        return None
    return sp.csr_matrix((data, (coo.row, coo.col)), shape=M.shape)


def _inf_norm(M: sp.csr_matrix) -> float:
    return float(abs(M).sum(axis=1).max()) if M.nnz else 0.0


def _tree_scaling(M: sp.csr_matrix) -> np.ndarray | None:
    """Log-scaling that symmetrizes ``M`` along a spanning forest of mutual edges.

    For each tree edge (parent i, child j) with both a_ij and a_ji positive,
    (d_j / d_i)^2 = a_ji / a_ij makes the scaled pair equal.  This is exact
    for tridiagonal and other tree-patterned matrices.  Returns None when
    there are no mutual edges or the scaling is trivial.
    """
    n = M.shape[0]
    coo = M.tocoo()
    Mt = M.T.tocsr()
    back = np.asarray(Mt[coo.row, coo.col]).ravel()
    mutual = back > 0
    if not np.any(mutual):
        return None
    rows, cols = coo.row[mutual], coo.col[mutual]
    # log(a_ji / a_ij) stored on the (i, j) entry
    ratio = np.log(back[mutual]) - np.log(coo.data[mutual])
    if np.all(ratio == 0):
        return None
    R = sp.csr_matrix((ratio, (rows, cols)), shape=(n, n))
    pattern = sp.csr_matrix((np.ones(rows.size), (rows, cols)), shape=(n, n))
    logd = np.zeros(n)
    count, labels = csgraph.connected_components(pattern, directed=False)
    sizes = np.bincount(labels, minlength=count)
    roots = np.unique(labels[sizes[labels] > 1], return_index=True)[1]
    for root in np.flatnonzero(sizes[labels] > 1)[roots]:
        order, pred = csgraph.breadth_first_order(pattern, root, directed=False)
        children = order[1:]
        parents = pred[children]
        step = (0.5 * np.asarray(R[parents, children]).ravel()).tolist()
        # parents precede children in breadth-first order
        out = logd.tolist()
        for i, j, w in zip(parents.tolist(), children.tolist(), step):
            out[j] = out[i] + w
        logd = np.asarray(out)
    return logd


def _balance(M: sp.csr_matrix, opts: SolverOptions):
    """Diagonal similarity that makes the right and left Perron vectors close.

    With D = diag(sqrt(u / v)) the matrix D^-1 M D has equal right and left
    Perron vectors, so its Perron root has condition number 1.  ``u`` and
    ``v`` are only approximated by a few power steps, so the scaling is
    refined over several rounds.  Returns ``(B, logd, xr, xl, spent)``
    with ``logd`` None when no scaling was needed.
    """
    n = M.shape[0]
    B = M
    logd = _tree_scaling(M)
    if logd is not None:
        B_tree = _rescale(M, logd)
        if B_tree is None:
            logd = None
        else:
            B = B_tree
    xr = xl = np.full(n, 1.0 / math.sqrt(n))
    spent = 0
    if logd is not None and abs(B - B.T).max() <= 1e-14 * max(abs(B).max(), 1e-300):
        # symmetric after scaling: both Perron vectors coincide already
        return B, logd, xr, xl, spent
    probe = int(min(max(4 * n, 200), 2000))
    loose = max(opts.tol, 1e-6)
    prev = None
    for _ in range(_MAX_BALANCE_ROUNDS):
        its = min(probe, opts.max_iterations - spent)
        if its <= 0:
            break
        Bt = B.T.tocsr()
        shift = _inf_norm(B) / 2
        # Krylov methods are unreliable on strongly nonnormal matrices;
        # plain power steps are safe there
        r, _ = _power_iteration(B.dot, shift, loose, its, xr, detect_stall=False)
        l, _ = _power_iteration(Bt.dot, shift, loose, its, xl, detect_stall=False)
        spent += max(r.iterations, l.iterations)
        xr, xl = np.abs(r.x), np.abs(l.x)
        vu = float(xl @ xr)
        estimate = 1.0 / vu if vu > 0 else math.inf
        # unconverged probes understate nonnormality, so only trust a small
        # estimate once both sides converged or the vectors nearly coincide
        if estimate <= 1.0 + 1e-3 or (estimate <= _BALANCED_KAPPA and r.converged and l.converged):
            break
        if prev is not None and abs(estimate - prev) <= 1e-2 * prev and estimate <= _BALANCED_KAPPA:
            break
        prev = estimate
        with np.errstate(divide="ignore"):
            step = 0.5 * (np.maximum(np.log(xr), _LOG_FLOOR) - np.maximum(np.log(xl), _LOG_FLOOR))
        trial = step if logd is None else logd + step
        B_new = _rescale(M, trial)
        # a step taken from poorly converged vectors can make things worse;
        # a useful scaling moves ||B||_inf towards rho, not away from it
        if B_new is None or _inf_norm(B_new) > 2 * _inf_norm(B):
            break
        B, logd = B_new, trial
        # both vectors of the rescaled matrix should be close to sqrt(u * v)
        xr = np.sqrt(xr * xl)
        if not np.any(xr > 0):
            xr = np.full(n, 1.0 / math.sqrt(n))
        xr = xr / np.linalg.norm(xr)
        xl = xr.copy()
    return B, logd, xr, xl, spent


# -- assembling a pair ----------------------------------------------------------------


def _scaled(x: np.ndarray, logd: np.ndarray | None, sign: int) -> tuple[np.ndarray, float]:
    """Unit vector along D^sign x and log of ||D^sign x|| (``x`` unit)."""
    if logd is None:
        return x, 0.0
    with np.errstate(divide="ignore"):
        lx = np.log(np.maximum(x, 0.0)) + sign * logd
    top = float(lx.max())
    y = np.exp(lx - top)
    s = float(np.linalg.norm(y))
    return y / s, top + math.log(s)


def _scaled_norm(r: np.ndarray, logd: np.ndarray | None, sign: int, log_norm: float) -> float:
    """||D^sign r|| / exp(log_norm) without forming D."""
    if logd is None:
        return float(np.linalg.norm(r))
    with np.errstate(divide="ignore"):
        lr = np.log(np.abs(r)) + sign * logd - log_norm
    top = float(lr.max())
    if top == -math.inf:
        return 0.0
    return float(math.exp(top) * np.linalg.norm(np.exp(lr - top))) if top < 700 else math.inf


def _assemble(matvec, rmatvec, right, left, logd, tol, reducible) -> PerronPair:
    uB = _sign_normalize(right.x)
    vB = _sign_normalize(left.x)
    BuB = matvec(uB)
    BtvB = rmatvec(vB)
    vu = float(vB @ uB)
    if vu > 1e-8:
        rho = float(vB @ BuB) / vu
    else:
        # the two-sided quotient is unreliable for a nearly defective root
        rho = right.theta if right.residual <= left.residual else left.theta
    rho = max(rho, 0.0)
    u, log_su = _scaled(uB, logd, +1)
    v, log_sv = _scaled(vB, logd, -1)
    res_r = _scaled_norm(BuB - rho * uB, logd, +1, log_su)
    res_l = _scaled_norm(BtvB - rho * vB, logd, -1, log_sv)
    if vu <= 0:
        kappa = math.inf
    else:
        log_kappa = log_su + log_sv - math.log(vu)
        kappa = math.exp(log_kappa) if log_kappa < 709 else math.inf
    bound = tol * max(1.0, rho)
    return PerronPair(
        rho=rho,
        u=u,
        v=v,
        kappa=kappa,
        residual_right=res_r,
        residual_left=res_l,
        iterations=right.iterations + left.iterations,
        converged=res_r <= bound and res_l <= bound,
        reducible=reducible,
    )


def _solve(
    matvec: Callable,
    rmatvec: Callable,
    n: int,
    norm_bound: float,
    opts: SolverOptions,
    logd: np.ndarray | None = None,
    xr: np.ndarray | None = None,
    xl: np.ndarray | None = None,
    spent: int = 0,
    reducible: bool = False,
) -> PerronPair:
    shift = norm_bound / 2 if opts.shift == "auto" else float(opts.shift)
    uniform = np.full(n, 1.0 / math.sqrt(n))
    xr = uniform if xr is None else xr
    xl = uniform if xl is None else xl
    used_r = used_l = spent
    inner = 0.5 * opts.tol
    while True:
        right = _dominant(matvec, n, shift, inner, max(opts.max_iterations - used_r, 1),
                          opts.subspace_dim, xr)
        left = _dominant(rmatvec, n, shift, inner, max(opts.max_iterations - used_l, 1),
                         opts.subspace_dim, xl)
        used_r += right.iterations
        used_l += left.iterations
        right.iterations, left.iterations = used_r, used_l
        pair = _assemble(matvec, rmatvec, right, left, logd, opts.tol, reducible)
        out_of_budget = max(used_r, used_l) >= opts.max_iterations
        if pair.converged or out_of_budget or inner * 0.1 < _INNER_FLOOR:
            break
        # the shared eigenvalue estimate or the rescaling amplified the
        # residuals; tighten the inner tolerance and continue from here
        inner *= 0.1
        xr, xl = right.x, left.x
    if not pair.converged:
        raise ConvergenceError(
            f"Perron solve did not converge within {opts.max_iterations} iterations "
            f"(residuals {pair.residual_right:.3e}, {pair.residual_left:.3e})",
            pair,
        )
    return pair


# -- public API -----------------------------------------------------------------


def _scaled_kappa(pair: PerronPair, logd: np.ndarray | None) -> float:
    """Condition number of the Perron root of D^-1 A D (0 if not measurable)."""
    if not (np.all(pair.u > 0) and np.all(pair.v > 0)):
        return 0.0
    shift = 0.0 if logd is None else logd
    lu = np.log(pair.u) - shift
    lv = np.log(pair.v) + shift
    xr = np.exp(lu - lu.max())
    xl = np.exp(lv - lv.max())
    vu = float((xl / np.linalg.norm(xl)) @ (xr / np.linalg.norm(xr)))
    return 1.0 / vu if vu > 0 else math.inf


def _trivial_pair(A: SparseAdjacency) -> PerronPair | None:
    """Exact answer for graphs without cycles (rho = 0), else ``None``."""
    n = A.n
    if A.m == 0:
        e = np.full(n, 1.0 / math.sqrt(n))
        return PerronPair(0.0, e, e.copy(), 1.0, 0.0, 0.0, 0, True, n > 1)
    scc = strongly_connected_components(A)
    if scc.component_count < n:
        return None
    # every node is its own component and there are no self-loops: nilpotent.
    # Sources span the right null vectors, sinks the left ones.
    u = (np.bincount(A.col_indices, minlength=n) == 0).astype(float)
    v = (np.diff(A.row_offsets) == 0).astype(float)
    u /= np.linalg.norm(u)
    v /= np.linalg.norm(v)
    return PerronPair(0.0, u, v, _condition(u, v), 0.0, 0.0, 0, True, True)


def perron_pair_operator(
    op: LinearOperator,
    opts: SolverOptions | None = None,
    norm_bound: float | None = None,
    reducible: bool = False,
) -> PerronPair:
    """Perron pair of a nonnegative matrix available only through products.

    ``op`` needs ``matvec`` and ``rmatvec``.  ``norm_bound`` bounds
    ``||A||_inf`` and sets the automatic shift; when omitted it is measured
    with one product against the ones vector (exact for nonnegative ``A``).
    No diagonal balancing is attempted here.
    """
    opts = opts or SolverOptions()
    n = op.shape[0]
    if norm_bound is None:
        norm_bound = float(np.max(op.matvec(np.ones(n))))
    return _solve(op.matvec, op.rmatvec, n, norm_bound, opts, reducible=reducible)


def perron_pair(A, opts: SolverOptions | None = None, check_reducible: bool = True) -> PerronPair:
    """Perron root, unit nonnegative right/left Perron vectors and 1/(v^T u).

    ``A`` is a :class:`SparseAdjacency`, a scipy sparse matrix or a dense
    array with nonnegative entries.  Reducible input is solved anyway (the
    spectral radius still exists) but the result is flagged and a
    :class:`ReducibleMatrixWarning` is issued, since the vectors need not be
    unique.

    Raises :class:`ConvergenceError`, carrying the best iterate, when the
    iteration budget runs out.
    """
    opts = opts or SolverOptions()
    adj = A if isinstance(A, SparseAdjacency) else SparseAdjacency.from_scipy(sp.csr_matrix(A))
    trivial = _trivial_pair(adj)
    if trivial is not None:
        return trivial
    reducible = False
    if check_reducible:
        reducible = not strongly_connected_components(adj).is_irreducible
        if reducible:
            warnings.warn(
                "matrix is reducible; Perron vectors may not be unique",
                ReducibleMatrixWarning,
                stacklevel=2,
            )
    M = adj.to_csr()
    B, logd, xr, xl, spent = _balance(M, opts)
    Bt = B.T.tocsr()
    try:
        pair = _solve(B.dot, Bt.dot, adj.n, _inf_norm(B), opts, logd, xr, xl, spent, reducible)
    except ConvergenceError as exc:
        if logd is None:
            raise
        # extreme weights can make the scaling itself the problem: components
        # that are tiny after scaling lose their relative accuracy
        log.debug("balanced solve failed (%s); retrying without scaling", exc)
        try:
            return _solve(M.dot, M.T.tocsr().dot, adj.n, adj.inf_norm(), opts, reducible=reducible)
        except ConvergenceError as plain:
            worse = max(plain.best.residual_right, plain.best.residual_left)
            if worse < max(exc.best.residual_right, exc.best.residual_left):
                raise
            raise exc from None
    if pair.kappa > _BALANCED_KAPPA and _scaled_kappa(pair, logd) > _BALANCED_KAPPA:
        # the probes missed part of the nonnormality; rescale with the
        # converged vectors so kappa comes from a well-conditioned problem
        logd = 0.5 * (np.log(pair.u) - np.log(pair.v))
        B = _rescale(M, logd)
        if B is not None:
            x = np.sqrt(pair.u * pair.v)
            x /= np.linalg.norm(x)
            Bt = B.T.tocsr()
            pair = _solve(B.dot, Bt.dot, adj.n, _inf_norm(B), opts, logd, x, x.copy(),
                          pair.iterations // 2, reducible)
    return pair


def spectral_norm_lower_bound_check(
    A, rho: float, k: int, max_iterations: int = 10_000, rtol: float = 1e-8
) -> bool:
    """Check ``rho**k <= ||A^k||_2 * (1 + rtol)``.

    ``||A^k||_2`` is estimated by power iteration on ``(A^k)^T A^k`` applied
    implicitly; every estimate is a lower bound of the true norm, so the
    iteration stops as soon as the inequality is confirmed.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    op, bound = _as_operator(A)
    if bound > 0 and k * math.log10(bound) > 300:
        raise OverflowError(f"||A||^{k} would overflow; use a smaller k")
    n = op.shape[0]
    target = rho**k
    if not math.isfinite(target):
        raise OverflowError(f"rho^{k} overflows; use a smaller k")
    x = np.full(n, 1.0 / math.sqrt(n))
    est = 0.0
    for _ in range(max_iterations):
        y = x
        for _ in range(k):
            y = op.matvec(y)
        if not np.all(np.isfinite(y)):
            raise OverflowError(f"A^{k} x overflowed; use a smaller k")
        prev, est = est, float(np.linalg.norm(y))
        if target <= est * (1 + rtol):
            return True
        for _ in range(k):
            y = op.rmatvec(y)
        ny = np.linalg.norm(y)
        if ny == 0:
            break
        x = y / ny
        if est - prev <= 1e-15 * est:
            break
    return target <= est * (1 + rtol)


# -- symmetric tridiagonal oracles ---------------------------------------------------


def _sturm_counts(d: np.ndarray, e2: np.ndarray, x: np.ndarray, pivmin: float) -> np.ndarray:
    """Number of eigenvalues strictly below each shift in ``x``."""
    count = np.zeros(x.shape, dtype=np.int64)
    q = d[0] - x
    q = np.where(np.abs(q) < pivmin, -pivmin, q)
    count += q < 0
    for i in range(1, d.size):
        q = d[i] - x - e2[i - 1] / q
        q = np.where(np.abs(q) < pivmin, -pivmin, q)
        count += q < 0
    return count


def sturm_tridiag_eigenvalues(diag, offdiag, tol: float = 1e-10) -> np.ndarray:
    """All eigenvalues of a symmetric tridiagonal matrix, sorted descending.

    Sturm-sequence bisection; each eigenvalue is located to an absolute
    accuracy of ``tol * max(1, G)`` with ``G`` the Gershgorin bound.
    """
    d = np.asarray(diag, dtype=np.float64).ravel()
    e = np.asarray(offdiag, dtype=np.float64).ravel()
    n = d.size
    if n == 0:
        return d.copy()
    if e.size != n - 1:
        raise ValueError("offdiag must have length len(diag) - 1")
    if n == 1:
        return d.copy()
    ae = np.abs(e)
    radius = np.zeros(n)
    radius[:-1] += ae
    radius[1:] += ae
    lo_g = float(np.min(d - radius))
    hi_g = float(np.max(d + radius))
    gbound = max(abs(lo_g), abs(hi_g))
    atol = tol * max(1.0, gbound)
    e2 = e * e
    pivmin = np.finfo(float).tiny * max(1.0, float(e2.max(initial=0.0))) / np.finfo(float).eps
    idx = np.arange(n)
    lo = np.full(n, lo_g - atol)
    hi = np.full(n, hi_g + atol)
    steps = int(math.ceil(math.log2(max((hi_g - lo_g + 2 * atol) / atol, 2.0)))) + 1
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        below = _sturm_counts(d, e2, mid, pivmin)
        # eigenvalue number idx (ascending) lies below mid iff more than idx are below
        left = below > idx
        hi = np.where(left, mid, hi)
        lo = np.where(left, lo, mid)
        if np.all(hi - lo <= atol):
            break
    return np.sort(0.5 * (lo + hi))[::-1]


def _tridiagonal_parts(M) -> tuple[np.ndarray, np.ndarray, object]:
    if isinstance(M, tuple):
        d, e = (np.asarray(a, dtype=float) for a in M)
        n = d.size
        dense = np.diag(d) + np.diag(e, 1) + np.diag(e, -1)
        return d, e, dense
    if isinstance(M, SparseAdjacency):
        dense = M.toarray()
    elif sp.issparse(M):
        dense = M.toarray()
    else:
        dense = np.asarray(M, dtype=float)
    n = dense.shape[0]
    if dense.shape != (n, n):
        raise ValueError("matrix must be square")
    if np.any(np.triu(dense, 2)) or np.any(np.tril(dense, -2)):
        raise ValueError("matrix is not tridiagonal")
    e = np.diag(dense, 1)
    if not np.array_equal(e, np.diag(dense, -1)):
        raise ValueError("matrix is not symmetric")
    return np.diag(dense).copy(), e.copy(), dense


def bhatia_spectral_distance(M1, M2) -> tuple[float, float]:
    """Relative spectral distance and relative Frobenius distance.

    Inputs are symmetric tridiagonal matrices (SparseAdjacency, dense arrays
    or ``(diag, offdiag)`` tuples).  Returns ``(lhs, rhs)`` where ``lhs``
    compares both spectra sorted non-increasingly; Bhatia's inequality
    guarantees ``lhs <= rhs``.
    """
    d1, e1, D1 = _tridiagonal_parts(M1)
    d2, e2, D2 = _tridiagonal_parts(M2)
    if d1.size != d2.size:
        raise ValueError("matrices must have the same size")
    l1 = sturm_tridiag_eigenvalues(d1, e1)
    l2 = sturm_tridiag_eigenvalues(d2, e2)
    denom = float(np.linalg.norm(l1))
    if denom == 0:
        raise ValueError("relative distance undefined: ||M1||_F = 0")
    lhs = float(np.linalg.norm(l1 - l2)) / denom
    rhs = relative_frobenius_distance(D1, D2)
    return lhs, rhs
