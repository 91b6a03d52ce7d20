"""Minimum-cost assignment over score matrices, with virtual-column padding."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit


@njit(cache=True)
def hungarian(cost):
    """O(n^3) shortest-augmenting-path Hungarian method on a square matrix.

    Rows are inserted in ascending order and, when several columns share the
    minimal reduced cost, the lowest column index is taken, so the result is
    reproducible. Returns ``col_of_row``.
    """
    n = cost.shape[0]
    inf = np.inf
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    p = np.zeros(n + 1, dtype=np.int64)
    way = np.zeros(n + 1, dtype=np.int64)
    minv = np.empty(n + 1)
    used = np.empty(n + 1, dtype=np.bool_)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv[:] = inf
        used[:] = False
        while True:
            used[j0] = True
            i0 = p[j0]
            delta = inf
            j1 = 0
            for j in range(1, n + 1):
                if not used[j]:
                    cur = cost[i0 - 1, j - 1] - u[i0] - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while True:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
            if j0 == 0:
                break
    col_of_row = np.empty(n, dtype=np.int64)
    for j in range(1, n + 1):
        col_of_row[p[j] - 1] = j - 1
    return col_of_row


@dataclass
class CostMatrix:
    values: np.ndarray
    virtual_cols: int = 0
    transposed: bool = False

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise ValueError("cost matrix must be two-dimensional")

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]


@dataclass
class Assignment:
    pairs: list[tuple[int, int]]
    total_cost: float
    unassigned_rows: list[int] = field(default_factory=list)
    unassigned_cols: list[int] = field(default_factory=list)


def pad_to_square(m: CostMatrix) -> CostMatrix:
    """Append virtual columns holding the maximum original entry.

    Wide inputs are transposed first and flagged with ``transposed``.
    """
    if m.values.size == 0:
        raise ValueError("empty cost matrix")
    values = m.values
    transposed = m.transposed
    if values.shape[0] < values.shape[1]:
        values = values.T
        transposed = not transposed
    rows, cols = values.shape
    if rows == cols:
        return CostMatrix(values.copy(), m.virtual_cols, transposed)
    pad = np.full((rows, rows - cols), values.max())
    return CostMatrix(np.hstack([values, pad]), m.virtual_cols + rows - cols, transposed)


def solve(m: CostMatrix | np.ndarray) -> Assignment:
    """Minimum-cost assignment; pairs on virtual columns are dropped.

    Accepts any rectangular matrix (it is padded here if needed). Pair
    indices and the unassigned lists always refer to the original orientation
    of ``m``.
    """
    if not isinstance(m, CostMatrix):
        m = CostMatrix(m)
    if not np.all(np.isfinite(m.values)):
        raise ValueError("cost matrix contains non-finite entries")
    sq = m if (m.rows == m.cols and m.values.size) else pad_to_square(m)
    real_cols = sq.cols - sq.virtual_cols
    col_of_row = hungarian(np.ascontiguousarray(sq.values))
    pairs = []
    total = 0.0
    for r in range(sq.rows):
        c = int(col_of_row[r])
        if c < real_cols:
            total += sq.values[r, c]
            pairs.append((r, c))
    n_rows, n_cols = sq.rows, real_cols
    if sq.transposed:
        pairs = sorted((c, r) for r, c in pairs)
        n_rows, n_cols = n_cols, n_rows
    rows_used = {r for r, _ in pairs}
    cols_used = {c for _, c in pairs}
    return Assignment(
        pairs=pairs,
        total_cost=float(total),
        unassigned_rows=[r for r in range(n_rows) if r not in rows_used],
        unassigned_cols=[c for c in range(n_cols) if c not in cols_used],
    )
