"""Weighted directed graphs stored as canonical CSR adjacency matrices.

A :class:`SparseAdjacency` is immutable.  Rows are ascending, column indices
are ascending within each row, every stored weight is strictly positive and
there are no self-loops or duplicate entries.  Node indices are 0-based in
the library; file readers and writers translate from/to 1-based indices
when asked.
"""

from __future__ import annotations

import io
import math
import os
import re
from dataclasses import dataclass, field
from typing import BinaryIO, Iterator

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

__all__ = [
    "EdgeRef",
    "GraphFormatError",
    "GraphValidationError",
    "SccReport",
    "SparseAdjacency",
    "load_edge_list",
    "relative_frobenius_distance",
    "strongly_connected_components",
    "symmetrize",
    "write_edge_list",
]


class GraphFormatError(ValueError):
    """Malformed input line; ``lineno`` is 1-based."""

    def __init__(self, message: str, lineno: int | None = None):
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)
        self.lineno = lineno


class GraphValidationError(ValueError):
    """Input violates a model invariant (negative weight, bad index, ...)."""


@dataclass(frozen=True)
class EdgeRef:
    h: int
    k: int
    weight: float

    def __post_init__(self):
        if self.h == self.k:
            raise GraphValidationError(f"self-loop ({self.h}, {self.k}) is not an edge")
        if not self.weight > 0:
            raise GraphValidationError(f"edge weight must be positive, got {self.weight}")


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class SparseAdjacency:
    """Nonnegative weighted adjacency matrix in compressed sparse row form.

    Use :meth:`from_coo` or :meth:`from_dense` rather than the raw
    constructor unless the arrays are already canonical.
    """

    n: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    weights: np.ndarray
    _csr: sp.csr_matrix | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        row_offsets = _readonly(np.asarray(self.row_offsets, dtype=np.int64))
        col_indices = _readonly(np.asarray(self.col_indices, dtype=np.int64))
        weights = _readonly(np.asarray(self.weights, dtype=np.float64))
        object.__setattr__(self, "row_offsets", row_offsets)
        object.__setattr__(self, "col_indices", col_indices)
        object.__setattr__(self, "weights", weights)
        self._validate()

    def _validate(self):
        n = self.n
        if n < 1:
            raise GraphValidationError("a graph needs at least one node")
        ro, ci, w = self.row_offsets, self.col_indices, self.weights
        if ro.shape != (n + 1,) or ro[0] != 0 or np.any(np.diff(ro) < 0):
            raise GraphValidationError("row_offsets must be nondecreasing of length n+1 starting at 0")
        m = int(ro[-1])
        if ci.shape != (m,) or w.shape != (m,):
            raise GraphValidationError("col_indices and weights must have length m")
        if m == 0:
            return
        if ci.min() < 0 or ci.max() >= n:
            raise GraphValidationError("column index out of range")
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise GraphValidationError("weights must be finite and strictly positive")
        rows = np.repeat(np.arange(n, dtype=np.int64), np.diff(ro))
        if np.any(rows == ci):
            raise GraphValidationError("self-loops are not allowed")
        # sorted and unique within rows <=> strictly increasing except at row starts
        step = np.diff(ci)
        row_start = np.zeros(m, dtype=bool)
        row_start[ro[:-1][ro[:-1] < m]] = True
        if np.any((step <= 0) & ~row_start[1:]):
            raise GraphValidationError("column indices must be strictly increasing within each row")

    # -- construction -------------------------------------------------------

    @classmethod
    def from_coo(cls, n: int, rows, cols, weights=None) -> "SparseAdjacency":
        """Build from coordinate triples, sorting into canonical order.

        Duplicate (row, col) pairs and self-loops raise
        :class:`GraphValidationError`.
        """
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        if weights is None:
            weights = np.ones(rows.shape, dtype=np.float64)
        weights = np.asarray(weights, dtype=np.float64).ravel()
        if not (rows.shape == cols.shape == weights.shape):
            raise GraphValidationError("rows, cols and weights must have equal length")
        if rows.size:
            if min(rows.min(), cols.min()) < 0 or max(rows.max(), cols.max()) >= n:
                raise GraphValidationError(f"node index out of range for n={n}")
        if np.any(rows == cols):
            raise GraphValidationError("self-loops are not allowed")
        order = np.lexsort((cols, rows))
        rows, cols, weights = rows[order], cols[order], weights[order]
        if rows.size > 1:
            dup = (np.diff(rows) == 0) & (np.diff(cols) == 0)
            if np.any(dup):
                j = int(np.flatnonzero(dup)[0])
                raise GraphValidationError(f"duplicate edge ({rows[j]}, {cols[j]})")
        row_offsets = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(rows, minlength=n), out=row_offsets[1:])
        return cls(n, row_offsets, cols, weights)

    @classmethod
    def from_dense(cls, M) -> "SparseAdjacency":
        M = np.asarray(M, dtype=np.float64)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise GraphValidationError("adjacency matrix must be square")
        if np.any(M < 0):
            raise GraphValidationError("negative weight")
        if np.any(np.diag(M) != 0):
            raise GraphValidationError("self-loops are not allowed")
        rows, cols = np.nonzero(M)
        return cls.from_coo(M.shape[0], rows, cols, M[rows, cols])

    @classmethod
    def from_scipy(cls, M) -> "SparseAdjacency":
        """Convert a scipy sparse matrix; explicit zeros are dropped."""
        M = sp.coo_matrix(M)
        if M.shape[0] != M.shape[1]:
            raise GraphValidationError("adjacency matrix must be square")
        keep = M.data != 0
        if np.any(M.data[keep] < 0):
            raise GraphValidationError("negative weight")
        return cls.from_coo(M.shape[0], M.row[keep], M.col[keep], M.data[keep])

    # -- views --------------------------------------------------------------

    @property
    def m(self) -> int:
        return int(self.row_offsets[-1])

    @property
    def rows(self) -> np.ndarray:
        """Row index of every stored entry (same order as ``col_indices``)."""
        return np.repeat(np.arange(self.n, dtype=np.int64), np.diff(self.row_offsets))

    def to_csr(self) -> sp.csr_matrix:
        if self._csr is None:
            M = sp.csr_matrix(
                (self.weights, self.col_indices, self.row_offsets), shape=(self.n, self.n)
            )
            M.has_sorted_indices = True
            object.__setattr__(self, "_csr", M)
        return self._csr

    def toarray(self) -> np.ndarray:
        return self.to_csr().toarray()

    def transpose(self) -> "SparseAdjacency":
        return SparseAdjacency.from_coo(self.n, self.col_indices, self.rows, self.weights)

    @property
    def T(self) -> "SparseAdjacency":
        return self.transpose()

    def edges(self) -> Iterator[EdgeRef]:
        for h, k, w in zip(self.rows.tolist(), self.col_indices.tolist(), self.weights.tolist()):
            yield EdgeRef(h, k, w)

    def _find(self, h: int, k: int) -> int:
        lo, hi = self.row_offsets[h], self.row_offsets[h + 1]
        j = lo + int(np.searchsorted(self.col_indices[lo:hi], k))
        if j < hi and self.col_indices[j] == k:
            return int(j)
        return -1

    def weight(self, h: int, k: int) -> float:
        """Stored weight of edge h -> k, or 0.0 when absent."""
        if not (0 <= h < self.n and 0 <= k < self.n):
            raise IndexError(f"node index out of range for n={self.n}")
        j = self._find(h, k)
        return float(self.weights[j]) if j >= 0 else 0.0

    def has_edge(self, h: int, k: int) -> bool:
        return 0 <= h < self.n and 0 <= k < self.n and self._find(h, k) >= 0

    def with_weight(self, h: int, k: int, weight: float) -> "SparseAdjacency":
        """Copy with edge h -> k set to ``weight``; a weight of 0 removes it."""
        if weight < 0:
            raise GraphValidationError("negative weight")
        j = self._find(h, k)
        if j < 0:
            if weight == 0:
                return self
            rows = np.append(self.rows, h)
            cols = np.append(self.col_indices, k)
            w = np.append(self.weights, weight)
            return SparseAdjacency.from_coo(self.n, rows, cols, w)
        if weight == 0:
            keep = np.ones(self.m, dtype=bool)
            keep[j] = False
            offsets = self.row_offsets.copy()
            offsets[h + 1:] -= 1
            return SparseAdjacency(self.n, offsets, self.col_indices[keep], self.weights[keep])
        w = self.weights.copy()
        w[j] = weight
        return SparseAdjacency(self.n, self.row_offsets, self.col_indices, w)

    def is_symmetric(self) -> bool:
        t = self.transpose()
        return (
            np.array_equal(t.row_offsets, self.row_offsets)
            and np.array_equal(t.col_indices, self.col_indices)
            and np.array_equal(t.weights, self.weights)
        )

    def inf_norm(self) -> float:
        """Maximum row sum."""
        if self.m == 0:
            return 0.0
        return float(np.bincount(self.rows, weights=self.weights, minlength=self.n).max())

    def frobenius_norm(self) -> float:
        return float(np.linalg.norm(self.weights))

    def __eq__(self, other):
        if not isinstance(other, SparseAdjacency):
            return NotImplemented
        return (
            self.n == other.n
            and np.array_equal(self.row_offsets, other.row_offsets)
            and np.array_equal(self.col_indices, other.col_indices)
            and np.array_equal(self.weights, other.weights)
        )

    __hash__ = None

    def __repr__(self):
        return f"SparseAdjacency(n={self.n}, m={self.m})"


# -- connectivity -------------------------------------------------------------


@dataclass(frozen=True)
class SccReport:
    component_count: int
    component_of: np.ndarray
    is_irreducible: bool


def strongly_connected_components(A: SparseAdjacency) -> SccReport:
    """Strongly connected components; a one-node graph counts as reducible."""
    count, labels = connected_components(A.to_csr(), directed=True, connection="strong")
    labels = labels.astype(np.int64)
    # relabel by first appearance so ids do not depend on traversal details
    _, first = np.unique(labels, return_index=True)
    remap = np.empty(count, dtype=np.int64)
    remap[np.argsort(np.argsort(first))] = np.arange(count)
    labels = _readonly(remap[labels])
    return SccReport(int(count), labels, bool(count == 1 and A.n > 1))


# -- matrix utilities ---------------------------------------------------------


def symmetrize(A: SparseAdjacency) -> SparseAdjacency:
    """Return (A + A^T) / 2."""
    return SparseAdjacency.from_scipy((A.to_csr() + A.to_csr().T) * 0.5)


def relative_frobenius_distance(M1, M2) -> float:
    """||M1 - M2||_F / ||M1||_F for SparseAdjacency or array-like inputs."""
    a = M1.to_csr() if isinstance(M1, SparseAdjacency) else sp.csr_matrix(np.asarray(M1, dtype=float))
    b = M2.to_csr() if isinstance(M2, SparseAdjacency) else sp.csr_matrix(np.asarray(M2, dtype=float))
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    denom = sp.linalg.norm(a, "fro")
    if denom == 0:
        raise ValueError("relative distance undefined: ||M1||_F = 0")
    return float(sp.linalg.norm(a - b, "fro") / denom)


# -- file formats -------------------------------------------------------------


def _open_text(source) -> tuple[io.TextIOBase, bool]:
    if isinstance(source, (str, os.PathLike)):
        return open(source, "r", encoding="utf-8"), True
    if isinstance(source, (bytes, bytearray)):
        return io.StringIO(bytes(source).decode("utf-8")), True
    if isinstance(source, io.TextIOBase):
        return source, False
    return io.TextIOWrapper(source, encoding="utf-8"), False


def _parse_weight(tok: str, lineno: int) -> float:
    try:
        w = float(tok)
    except ValueError:
        raise GraphFormatError(f"bad weight {tok!r}", lineno) from None
    if not math.isfinite(w):
        raise GraphFormatError(f"non-finite weight {tok!r}", lineno)
    if w < 0:
        raise GraphValidationError(f"line {lineno}: negative weight {w}")
    if w == 0:
        raise GraphValidationError(f"line {lineno}: zero weight")
    return w


def _parse_index(tok: str, lineno: int, base: int) -> int:
    try:
        i = int(tok)
    except ValueError:
        raise GraphFormatError(f"bad node index {tok!r}", lineno) from None
    if i < base:
        raise GraphValidationError(f"line {lineno}: node index {i} below index base {base}")
    return i - base


# header written by write_edge_list; keeps trailing isolated nodes
_SIZE_COMMENT = re.compile(r"^\s*#\s*n=(\d+)\b")


def _read_tsv(f, index_base: int, n: int | None):
    rows, cols, ws = [], [], []
    declared = None
    for lineno, line in enumerate(f, 1):
        m = _SIZE_COMMENT.match(line)
        if m and declared is None:
            declared = int(m.group(1))
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        toks = line.split()
        if len(toks) not in (2, 3):
            raise GraphFormatError(f"expected 'src dst [weight]', got {len(toks)} fields", lineno)
        rows.append(_parse_index(toks[0], lineno, index_base))
        cols.append(_parse_index(toks[1], lineno, index_base))
        ws.append(_parse_weight(toks[2], lineno) if len(toks) == 3 else 1.0)
    size = max(max(rows, default=-1), max(cols, default=-1)) + 1
    if n is None and declared is not None and declared >= size:
        n = declared
    if n is None:
        n = max(size, 1)
    elif size > n:
        raise GraphValidationError(f"node index {size - 1 + index_base} out of range for n={n}")
    return n, rows, cols, ws


def _read_matrix_market(f, n: int | None):
    header = f.readline()
    toks = header.lower().split()
    if len(toks) != 5 or toks[0] != "%%matrixmarket" or toks[1] != "matrix":
        raise GraphFormatError("missing %%MatrixMarket matrix header", 1)
    _, _, layout, field_, symmetry = toks
    if layout != "coordinate":
        raise GraphFormatError(f"unsupported layout {layout!r}", 1)
    if field_ not in ("real", "integer", "pattern"):
        raise GraphFormatError(f"unsupported field {field_!r}", 1)
    if symmetry not in ("general", "symmetric"):
        raise GraphFormatError(f"unsupported symmetry {symmetry!r}", 1)
    size = None
    rows, cols, ws = [], [], []
    expected = 3 if field_ != "pattern" else 2
    lineno = 1
    for lineno, line in enumerate(f, 2):
        line = line.strip()
        if not line or line.startswith("%"):
            continue
        parts = line.split()
        if size is None:
            if len(parts) != 3:
                raise GraphFormatError("size line must be 'rows cols entries'", lineno)
            try:
                nr, nc, nnz = (int(p) for p in parts)
            except ValueError:
                raise GraphFormatError("bad size line", lineno) from None
            if nr != nc:
                raise GraphValidationError(f"adjacency matrix must be square, got {nr}x{nc}")
            size = (nr, nnz)
            continue
        if len(parts) != expected:
            raise GraphFormatError(f"expected {expected} fields, got {len(parts)}", lineno)
        i = _parse_index(parts[0], lineno, 1)
        j = _parse_index(parts[1], lineno, 1)
        if i >= size[0] or j >= size[0]:
            raise GraphValidationError(f"line {lineno}: index out of range for n={size[0]}")
        w = _parse_weight(parts[2], lineno) if expected == 3 else 1.0
        rows.append(i)
        cols.append(j)
        ws.append(w)
        if symmetry == "symmetric" and i != j:
            rows.append(j)
            cols.append(i)
            ws.append(w)
    if size is None:
        raise GraphFormatError("missing size line", lineno)
    if n is not None and n != size[0]:
        raise GraphValidationError(f"file declares n={size[0]}, caller expected {n}")
    return size[0], rows, cols, ws


def load_edge_list(
    source: str | os.PathLike | BinaryIO | bytes,
    format: str = "tsv-edges",
    index_base: int = 1,
    n: int | None = None,
) -> tuple[SparseAdjacency, int]:
    """Read a graph file and return ``(adjacency, self_loops_dropped)``.

    ``format`` is ``"tsv-edges"`` (whitespace separated ``src dst [weight]``
    with ``#`` comments) or ``"matrix-market"`` (coordinate, always 1-based;
    ``index_base`` is ignored).  ``n`` overrides the node count inferred
    from a TSV file.
    """
    if index_base not in (0, 1):
        raise ValueError("index_base must be 0 or 1")
    f, owned = _open_text(source)
    try:
        if format == "tsv-edges":
            n, rows, cols, ws = _read_tsv(f, index_base, n)
        elif format == "matrix-market":
            n, rows, cols, ws = _read_matrix_market(f, n)
        else:
            raise ValueError(f"unknown format {format!r}")
    finally:
        if owned:
            f.close()
        elif isinstance(f, io.TextIOWrapper):
            f.detach()
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    ws = np.asarray(ws, dtype=np.float64)
    loops = rows == cols
    dropped = int(loops.sum())
    keep = ~loops
    return SparseAdjacency.from_coo(n, rows[keep], cols[keep], ws[keep]), dropped


def write_edge_list(
    A: SparseAdjacency, dest, format: str = "tsv-edges", index_base: int = 1
) -> None:
    """Write ``A`` in a format :func:`load_edge_list` reads back exactly.

    Weights are written with ``repr`` so the round trip is bit-identical.
    ``dest`` is a path or a text stream.
    """
    lines = []
    if format == "tsv-edges":
        b = index_base
        lines.append(f"# n={A.n} m={A.m}\n")
        for e in A.edges():
            lines.append(f"{e.h + b}\t{e.k + b}\t{e.weight!r}\n")
    elif format == "matrix-market":
        lines.append("%%MatrixMarket matrix coordinate real general\n")
        lines.append(f"{A.n} {A.n} {A.m}\n")
        for e in A.edges():
            lines.append(f"{e.h + 1} {e.k + 1} {e.weight!r}\n")
    else:
        raise ValueError(f"unknown format {format!r}")
    if isinstance(dest, (str, os.PathLike)):
        with open(dest, "w", encoding="utf-8") as f:
            f.writelines(lines)
    else:
        dest.writelines(lines)
