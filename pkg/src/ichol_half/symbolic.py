"""Level-of-fill sparsity patterns for IC(l)."""
from __future__ import annotations

import heapq
from dataclasses import dataclass
from functools import cached_property

import numpy as np


@dataclass(frozen=True, eq=False)
class FillPattern:
    """Lower-triangular CSC pattern of an incomplete factor with per-entry
    fill levels (0 for entries of the original matrix)."""

    n: int
    col_ptr: np.ndarray
    row_idx: np.ndarray
    level: np.ndarray

    @property
    def nnz(self) -> int:
        return int(self.row_idx.size)

    @cached_property
    def col_idx(self) -> np.ndarray:
        return np.repeat(np.arange(self.n), np.diff(self.col_ptr))

    def entries(self) -> set:
        """Set of ``(i, j)`` pairs, mostly for tests."""
        return set(zip(self.row_idx.tolist(), self.col_idx.tolist()))

    def positions(self, col_ptr, row_idx) -> np.ndarray:
        """Map the entries of a contained structure onto pattern positions."""
        n = self.n
        col = np.repeat(np.arange(n), np.diff(col_ptr))
        key_self = self.col_idx * n + self.row_idx
        key = col * n + np.asarray(row_idx)
        pos = np.searchsorted(key_self, key)
        pos = np.minimum(pos, key_self.size - 1)
        if np.any(key_self[pos] != key):
            raise ValueError("structure is not contained in the pattern")
        return pos

    @classmethod
    def from_structure(cls, struct) -> "FillPattern":
        """The IC(0) pattern of a matrix (anything with n/col_ptr/row_idx)."""
        return cls(struct.n, np.asarray(struct.col_ptr, dtype=np.int64),
                   np.asarray(struct.row_idx, dtype=np.int64),
                   np.zeros(len(struct.row_idx), dtype=np.int32))


def level_pattern(struct, level: int) -> FillPattern:
    """Pattern of the IC(``level``) factor of ``struct``.

    A fill entry (i, j) created through pivot k gets level
    ``lev(i,k) + lev(j,k) + 1``; entries whose final level exceeds
    ``level`` are discarded and take no part in later fill.
    """
    if level < 0:
        raise ValueError("level must be non-negative")
    n = struct.n
    col_ptr = np.asarray(struct.col_ptr)
    row_idx = np.asarray(struct.row_idx)
    if level == 0:
        return FillPattern.from_structure(struct)

    # rows of the strict lower triangle of A
    a_rows = [[] for _ in range(n)]
    for j in range(n):
        for i in row_idx[col_ptr[j] + 1:col_ptr[j + 1]]:
            a_rows[i].append(j)

    # finished rows feed columns: cols[k] holds (j, lev(j,k)) for rows j done
    cols = [[] for _ in range(n)]
    for i in range(n):
        lev = dict.fromkeys(a_rows[i], 0)
        heap = list(lev)
        heapq.heapify(heap)
        while heap:
            k = heapq.heappop(heap)
            lik = lev[k]
            for j, ljk in cols[k]:
                new = lik + ljk + 1
                if new > level:
                    continue
                old = lev.get(j)
                if old is None:
                    lev[j] = new
                    heapq.heappush(heap, j)
                elif new < old:
                    lev[j] = new
        for k, lk in lev.items():
            cols[k].append((i, lk))

    counts = np.array([len(c) + 1 for c in cols], dtype=np.int64)
    out_ptr = np.concatenate([[0], np.cumsum(counts)])
    out_rows = np.empty(out_ptr[-1], dtype=np.int64)
    out_lev = np.empty(out_ptr[-1], dtype=np.int32)
    for k in range(n):
        p = out_ptr[k]
        out_rows[p] = k
        out_lev[p] = 0
        # rows were appended in increasing i
        for q, (i, lk) in enumerate(cols[k], start=p + 1):
            out_rows[q] = i
            out_lev[q] = lk
    return FillPattern(n, out_ptr, out_rows, out_lev)
