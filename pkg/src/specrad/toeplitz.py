"""Tridiagonal Toeplitz matrices with positive off-diagonals.

The Perron root and vectors are known in closed form:

    rho   = 2 sqrt(t_sub t_super) cos(pi / (n + 1))
    u_k  ~= (t_sub / t_super)^(k/2) sin(k pi / (n + 1))
    v_k  ~= (t_super / t_sub)^(k/2) sin(k pi / (n + 1))

The geometric factors are evaluated in log space, because a ratio of 15 at
n = 500 already overflows a double.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.special import logsumexp

from .eigen import PerronPair
from .graph import GraphFormatError, GraphValidationError, SparseAdjacency


@dataclass(frozen=True)
class TridiagToeplitz:
    """Zero-diagonal tridiagonal Toeplitz matrix.

    ``t_sub`` sits on the subdiagonal (entries (k+1, k)) and ``t_super`` on
    the superdiagonal (entries (k, k+1)).
    """

    n: int
    t_sub: float
    t_super: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise GraphValidationError(f"n must be an integer >= 2, got {self.n}")
        for name in ("t_sub", "t_super"):
            t = getattr(self, name)
            if not (math.isfinite(t) and t > 0):
                raise GraphValidationError(f"{name} must be positive and finite, got {t}")

    @classmethod
    def symmetric(cls, n: int, sigma: float) -> "TridiagToeplitz":
        return cls(n, sigma, sigma)

    def to_adjacency(self) -> SparseAdjacency:
        i = np.arange(self.n - 1)
        rows = np.concatenate([i, i + 1])
        cols = np.concatenate([i + 1, i])
        w = np.concatenate([np.full(self.n - 1, self.t_super), np.full(self.n - 1, self.t_sub)])
        return SparseAdjacency.from_coo(self.n, rows, cols, w)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        y = np.zeros_like(x, dtype=float)
        y[:-1] += self.t_super * x[1:]
        y[1:] += self.t_sub * x[:-1]
        return y

    def rmatvec(self, x: np.ndarray) -> np.ndarray:
        y = np.zeros_like(x, dtype=float)
        y[:-1] += self.t_sub * x[1:]
        y[1:] += self.t_super * x[:-1]
        return y


def _log_unit_vector(n: int, log_ratio: float) -> tuple[np.ndarray, float]:
    """Unit vector with entries ratio^(k/2) sin(k pi/(n+1)) and its log norm."""
    k = np.arange(1, n + 1)
    logs = 0.5 * k * log_ratio + np.log(np.sin(k * math.pi / (n + 1)))
    log_norm = 0.5 * float(logsumexp(2 * logs))
    return np.exp(logs - log_norm), log_norm


def toeplitz_perron(T: TridiagToeplitz) -> PerronPair:
    """Closed-form Perron pair, with residuals measured on the actual matrix."""
    n = T.n
    angle = math.pi / (n + 1)
    rho = 2.0 * math.sqrt(T.t_sub * T.t_super) * math.cos(angle)
    log_ratio = math.log(T.t_sub) - math.log(T.t_super)
    u, log_nu = _log_unit_vector(n, log_ratio)
    v, log_nv = _log_unit_vector(n, -log_ratio)
    # v^T u of the unnormalized vectors is sum sin^2 = (n+1)/2
    log_kappa = log_nu + log_nv - math.log((n + 1) / 2)
    kappa = math.exp(log_kappa) if log_kappa < 709 else math.inf
    return PerronPair(
        rho=rho,
        u=u,
        v=v,
        kappa=max(kappa, 1.0),
        residual_right=float(np.linalg.norm(T.matvec(u) - rho * u)),
        residual_left=float(np.linalg.norm(T.rmatvec(v) - rho * v)),
        iterations=0,
        converged=True,
    )


def symmetrized_toeplitz_perron(T: TridiagToeplitz) -> float:
    """Perron root of the symmetric part (arithmetic mean of the two diagonals)."""
    return (T.t_sub + T.t_super) * math.cos(math.pi / (T.n + 1))


# -- mask chains ------------------------------------------------------------------


@dataclass(frozen=True)
class MaskChain:
    """People in a row; ``w_in[i]`` scales what person i inhales and
    ``w_out[i]`` what they exhale.  Without a mask both are 1."""

    w_in: np.ndarray
    w_out: np.ndarray
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        w_in = np.asarray(self.w_in, dtype=float).copy()
        w_out = np.asarray(self.w_out, dtype=float).copy()
        if w_in.ndim != 1 or w_in.shape != w_out.shape:
            raise GraphValidationError("w_in and w_out must be 1-d arrays of equal length")
        for name, w in (("w_in", w_in), ("w_out", w_out)):
            bad = np.flatnonzero(~((w > 0) & (w <= 1)))
            if bad.size:
                raise GraphValidationError(
                    f"{name}[{bad[0]}] = {w[bad[0]]} is outside (0, 1]"
                )
        w_in.setflags(write=False)
        w_out.setflags(write=False)
        object.__setattr__(self, "w_in", w_in)
        object.__setattr__(self, "w_out", w_out)
        if self.labels is not None and len(self.labels) != w_in.size:
            raise GraphValidationError("labels must match the number of people")

    @property
    def n(self) -> int:
        return int(self.w_in.size)

    @classmethod
    def from_csv(cls, path) -> "MaskChain":
        """Read ``person_id,w_in,w_out`` rows (header optional) in chain order."""
        labels, w_in, w_out = [], [], []
        with open(path, newline="") as f:
            for lineno, row in enumerate(csv.reader(f), start=1):
                if not row or not "".join(row).strip() or row[0].lstrip().startswith("#"):
                    continue
                if len(row) != 3:
                    raise GraphFormatError(f"expected 3 fields, got {len(row)}", lineno)
                try:
                    a, b = float(row[1]), float(row[2])
                except ValueError:
                    if not w_in:
                        continue  # header line
                    raise GraphFormatError(f"bad weight in {row!r}", lineno) from None
                labels.append(row[0].strip())
                w_in.append(a)
                w_out.append(b)
        if not w_in:
            raise GraphFormatError("mask profile has no rows")
        return cls(np.array(w_in), np.array(w_out), tuple(labels))


def build_mask_chain(chain: MaskChain) -> SparseAdjacency:
    """Tridiagonal transmission matrix of a mask chain.

    Entry (i, i+1) is w_in[i] w_out[i+1] and entry (i+1, i) is
    w_in[i+1] w_out[i].
    """
    n = chain.n
    if n < 2:
        raise GraphValidationError("a mask chain needs at least two people")
    i = np.arange(n - 1)
    sup = chain.w_in[:-1] * chain.w_out[1:]
    sub = chain.w_in[1:] * chain.w_out[:-1]
    return SparseAdjacency.from_coo(
        n, np.concatenate([i, i + 1]), np.concatenate([i + 1, i]), np.concatenate([sup, sub])
    )


def _off_diagonals(A) -> tuple[int, np.ndarray, np.ndarray]:
    """(n, superdiagonal, subdiagonal) of a zero-diagonal tridiagonal matrix."""
    if isinstance(A, TridiagToeplitz):
        return A.n, np.full(A.n - 1, A.t_super), np.full(A.n - 1, A.t_sub)
    if isinstance(A, SparseAdjacency):
        M = A.to_csr()
    else:
        M = sp.csr_matrix(A)
    n = M.shape[0]
    if n < 2 or M.shape != (n, n):
        raise GraphValidationError("need a square matrix of size >= 2")
    coo = M.tocoo()
    off = coo.col - coo.row
    nz = coo.data != 0
    if np.any(nz & (np.abs(off) > 1)) or np.any(nz & (off == 0)):
        raise GraphValidationError("matrix is not tridiagonal with zero diagonal")
    return n, M.diagonal(1), M.diagonal(-1)


def project_to_toeplitz_cone(A) -> TridiagToeplitz:
    """Frobenius-nearest tridiagonal Toeplitz matrix: the mean of each off-diagonal.

    Missing entries count as zeros in the means.
    """
    n, sup, sub = _off_diagonals(A)
    t_super, t_sub = float(np.mean(sup)), float(np.mean(sub))
    if t_super <= 0 or t_sub <= 0:
        raise GraphValidationError("projection leaves the cone: an off-diagonal mean is zero")
    return TridiagToeplitz(n, t_sub, t_super)


def make_circulant(T: TridiagToeplitz) -> SparseAdjacency:
    """Close the chain into a cycle: t_super at (n, 1) and t_sub at (1, n).

    Every row sums to t_sub + t_super, which is therefore the Perron root.
    """
    if T.n < 3:
        raise GraphValidationError("circulant completion needs n >= 3")
    A = T.to_adjacency()
    coo = A.to_csr().tocoo()
    rows = np.concatenate([coo.row, [T.n - 1, 0]])
    cols = np.concatenate([coo.col, [0, T.n - 1]])
    w = np.concatenate([coo.data, [T.t_super, T.t_sub]])
    return SparseAdjacency.from_coo(T.n, rows, cols, w)
