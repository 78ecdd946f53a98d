"""
Sparse symmetric positive definite matrices held as their lower triangle in
compressed sparse column form, plus the preprocessing that precedes a low
precision factorization: l2-norm symmetric scaling and the squeeze into a
16-bit format.
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sps

from .halffloat import FP16, FormatParams, decode, encode_array


class MatrixError(ValueError):
    """Invalid matrix data or a matrix the pipeline cannot handle."""


def _check_structure(n, col_ptr, row_idx):
    if col_ptr.shape != (n + 1,) or col_ptr[0] != 0:
        raise MatrixError("col_ptr must have length n+1 and start at 0")
    if np.any(np.diff(col_ptr) < 1):
        raise MatrixError("every column must hold its diagonal entry")
    starts = col_ptr[:-1]
    if np.any(row_idx[starts] != np.arange(n)):
        j = int(np.argmax(row_idx[starts] != np.arange(n)))
        raise MatrixError(f"column {j}: diagonal entry missing")
    step = np.diff(row_idx)
    step[starts[1:] - 1] = 1  # column boundaries
    if np.any(step <= 0):
        raise MatrixError("row indices not strictly increasing within a column")
    if n and row_idx.max() >= n:
        raise MatrixError("row index out of range")


@dataclass(frozen=True, eq=False)
class SparseSpd:
    """Lower triangle (diagonal first in each column) of a symmetric matrix.

    ``values`` are binary64.  Instances are treated as immutable.
    """

    n: int
    col_ptr: np.ndarray
    row_idx: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "col_ptr", np.asarray(self.col_ptr, dtype=np.int64))
        object.__setattr__(self, "row_idx", np.asarray(self.row_idx, dtype=np.int64))
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.float64))
        _check_structure(self.n, self.col_ptr, self.row_idx)
        if self.values.shape != self.row_idx.shape:
            raise MatrixError("values and row_idx differ in length")
        if not np.all(np.isfinite(self.values)):
            raise MatrixError("non-finite matrix entry")
        d = self.diagonal()
        if np.any(d <= 0):
            j = int(np.argmax(d <= 0))
            raise MatrixError(f"non-positive diagonal entry in column {j}")

    @property
    def nnz(self) -> int:
        """Entries stored in the lower triangle."""
        return int(self.row_idx.size)

    @cached_property
    def col_idx(self) -> np.ndarray:
        return np.repeat(np.arange(self.n), np.diff(self.col_ptr))

    def diagonal(self) -> np.ndarray:
        return self.values[self.col_ptr[:-1]]

    @cached_property
    def full(self) -> sps.csr_matrix:
        """The whole symmetric matrix as a CSR matrix (cached)."""
        low = sps.csc_matrix((self.values, self.row_idx, self.col_ptr),
                             shape=(self.n, self.n))
        strict = sps.tril(low, k=-1)
        return (low + strict.T).tocsr()

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self.full @ x

    def to_dense(self) -> np.ndarray:
        return self.full.toarray()

    def norm_inf(self) -> float:
        return float(abs(self.full).sum(axis=1).max()) if self.n else 0.0

    def with_values(self, values) -> "SparseSpd":
        return SparseSpd(self.n, self.col_ptr, self.row_idx, values)

    @classmethod
    def from_dense(cls, a, keep_zeros=False) -> "SparseSpd":
        """Build from a dense symmetric array; only the lower triangle is read."""
        a = np.asarray(a, dtype=np.float64)
        n = a.shape[0]
        col_ptr = [0]
        rows, vals = [], []
        for j in range(n):
            for i in range(j, n):
                if i == j or keep_zeros or a[i, j] != 0:
                    rows.append(i)
                    vals.append(a[i, j])
            col_ptr.append(len(rows))
        return cls(n, np.array(col_ptr), np.array(rows, dtype=np.int64),
                   np.array(vals))

    @classmethod
    def from_scipy(cls, m) -> "SparseSpd":
        """Build from a scipy sparse matrix; the lower triangle is used."""
        low = sps.tril(sps.csc_matrix(m)).tocsc()
        low.sum_duplicates()
        low.sort_indices()
        n = low.shape[0]
        return cls(n, low.indptr, low.indices, low.data)

    @classmethod
    def from_triplets(cls, n, rows, cols, vals) -> "SparseSpd":
        """Assemble from (i, j, v) triplets in either triangle.

        Upper-triangle entries are mirrored, duplicates summed and explicit
        zeros kept as structural entries.
        """
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals, dtype=np.float64)
        lo = np.maximum(rows, cols)
        hi = np.minimum(rows, cols)
        order = np.lexsort((lo, hi))
        lo, hi, vals = lo[order], hi[order], vals[order]
        key = hi * n + lo
        uniq, start = np.unique(key, return_index=True)
        summed = np.add.reduceat(vals, start) if vals.size else vals
        r = uniq % n if n else uniq
        c = uniq // n if n else uniq
        counts = np.bincount(c, minlength=n)
        col_ptr = np.concatenate([[0], np.cumsum(counts)])
        for j in range(n):
            if counts[j] == 0 or r[col_ptr[j]] != j:
                raise MatrixError(f"diagonal entry ({j + 1},{j + 1}) missing")
        return cls(n, col_ptr, r, summed)


def read_matrix_market(path) -> SparseSpd:
    """Read a real symmetric coordinate Matrix Market file."""
    path = os.fspath(path)
    with open(path) as fh:
        lines = fh.readlines()
    if not lines:
        raise MatrixError(f"{path}: empty file")
    header = lines[0].split()
    if (len(header) != 5 or header[0] != "%%MatrixMarket"
            or header[1].lower() != "matrix"):
        raise MatrixError(f"{path}:1: malformed Matrix Market header")
    fmt, field_, symm = (h.lower() for h in header[2:])
    if fmt != "coordinate":
        raise MatrixError(f"{path}:1: only coordinate format is supported")
    if field_ not in ("real", "integer", "double"):
        raise MatrixError(f"{path}:1: field {field_!r} not supported")
    if symm != "symmetric":
        raise MatrixError(f"{path}:1: matrix must be declared symmetric")

    lineno = 1
    size = None
    rows, cols, vals = [], [], []
    diag_line = {}
    for lineno, line in enumerate(lines[1:], start=2):
        s = line.strip()
        if not s or s.startswith("%"):
            continue
        parts = s.split()
        try:
            if size is None:
                m, n, nnz = (int(p) for p in parts[:3])
                if len(parts) != 3 or m != n:
                    raise ValueError
                size = (n, nnz)
                continue
            i, j, v = int(parts[0]), int(parts[1]), float(parts[2])
        except (ValueError, IndexError):
            raise MatrixError(f"{path}:{lineno}: cannot parse {s!r}") from None
        if len(parts) != 3 or not (1 <= i <= size[0] and 1 <= j <= size[0]):
            raise MatrixError(f"{path}:{lineno}: bad entry {s!r}")
        rows.append(i - 1)
        cols.append(j - 1)
        vals.append(v)
        if i == j:
            diag_line[i - 1] = lineno
    if size is None:
        raise MatrixError(f"{path}:{lineno}: missing size line")
    if len(vals) != size[1]:
        raise MatrixError(f"{path}:{lineno}: expected {size[1]} entries, "
                          f"found {len(vals)}")
    diag = np.zeros(size[0])
    for i, j, v in zip(rows, cols, vals):
        if i == j:
            diag[i] += v
    for i, ln in diag_line.items():
        if diag[i] <= 0:
            raise MatrixError(f"{path}:{ln}: non-positive diagonal entry "
                              f"({i + 1},{i + 1})")
    try:
        return SparseSpd.from_triplets(size[0], rows, cols, vals)
    except MatrixError as exc:
        raise MatrixError(f"{path}: {exc}") from None


def write_matrix_market(path, a: SparseSpd) -> None:
    with open(path, "w") as fh:
        fh.write("%%MatrixMarket matrix coordinate real symmetric\n")
        fh.write(f"{a.n} {a.n} {a.nnz}\n")
        for i, j, v in zip(a.row_idx, a.col_idx, a.values):
            fh.write(f"{i + 1} {j + 1} {float(v)!r}\n")


def scale_l2(a: SparseSpd):
    """Symmetric l2-norm scaling.

    ``s_i`` is the square root of the 2-norm of row ``i`` of the full
    symmetric matrix, and the scaled matrix has entries
    ``a_ij / (s_i s_j)``, all of magnitude at most one.

    Returns ``(s, a_hat)``.
    """
    sq = a.values ** 2
    off = a.row_idx != a.col_idx
    rownorm2 = np.bincount(a.row_idx, weights=sq, minlength=a.n)
    rownorm2 += np.bincount(a.col_idx[off], weights=sq[off], minlength=a.n)
    if np.any(rownorm2 == 0):
        raise MatrixError("zero row: matrix is singular")
    s = np.sqrt(np.sqrt(rownorm2))
    vals = a.values / (s[a.row_idx] * s[a.col_idx])
    return s, a.with_values(vals)


@dataclass(frozen=True, eq=False)
class HalfMatrix:
    """A scaled matrix squeezed into a 16-bit format (lower CSC)."""

    n: int
    col_ptr: np.ndarray
    row_idx: np.ndarray
    bits: np.ndarray
    n_dropped: int = 0
    fmt: FormatParams = FP16

    @property
    def nnz(self) -> int:
        return int(self.row_idx.size)

    def decoded(self) -> SparseSpd:
        return SparseSpd(self.n, self.col_ptr, self.row_idx,
                         np.asarray(decode(self.bits, self.fmt), dtype=np.float64))


def squeeze(a_hat: SparseSpd, flush_tol: float = 1e-5,
            fmt: FormatParams = FP16) -> HalfMatrix:
    """Drop entries below ``flush_tol`` in magnitude and round the rest to
    ``fmt``.  Dropped entries are removed from the structure."""
    keep = np.abs(a_hat.values) >= flush_tol
    diag_pos = a_hat.col_ptr[:-1]
    if not np.all(keep[diag_pos]):
        j = int(np.argmin(keep[diag_pos]))
        raise MatrixError(f"diagonal entry of column {j} flushed to zero")
    bits, status = encode_array(a_hat.values[keep], fmt)
    if np.any(status == 3):
        raise MatrixError("scaled entry overflows the target format")
    counts = np.bincount(a_hat.col_idx[keep], minlength=a_hat.n)
    col_ptr = np.concatenate([[0], np.cumsum(counts)])
    return HalfMatrix(a_hat.n, col_ptr, a_hat.row_idx[keep], bits,
                      int(keep.size - keep.sum()), fmt)


def make_rhs(a: SparseSpd) -> np.ndarray:
    """Right-hand side whose exact solution is the vector of ones."""
    return a.matvec(np.ones(a.n))
