"""Unbalanced linear assignment and matching against the sphere grid."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from . import kernels
from .sphere import SphereGrid


class AssignmentError(ValueError):
    pass


@dataclass(frozen=True)
class MatchingMap:
    """Injective map ``sigma[i]`` from source index to grid index."""

    sigma: np.ndarray

    def __len__(self):
        return len(self.sigma)

    def cost(self, cost: np.ndarray) -> float:
        return float(sum(cost[i, j] for i, j in enumerate(self.sigma)))


def solve_unbalanced_assignment(cost) -> MatchingMap:
    """Minimum-cost injection of ``N'`` rows into ``N >= N'`` columns.

    Among all optimal injections the lexicographically smallest ``sigma``
    is returned.
    """
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2:
        raise AssignmentError("cost must be a 2-D array")
    n_rows, n_cols = cost.shape
    if n_rows > n_cols:
        raise AssignmentError(f"more sources ({n_rows}) than targets ({n_cols})")
    if not np.all(np.isfinite(cost)):
        raise AssignmentError("cost contains non-finite entries")
    if n_rows == 0:
        return MatchingMap(np.zeros(0, dtype=np.int64))
    sq = np.zeros((n_cols, n_cols))
    sq[:n_rows] = cost
    col4row, u, v = kernels.lsap(sq)
    col4row = _lexicographic_optimum(sq, n_rows, col4row, u, v)
    return MatchingMap(np.ascontiguousarray(col4row[:n_rows]))


def _lexicographic_optimum(cost, n_real, col4row, u, v):
    """Re-route an optimal matching to the lexicographically first optimal one.

    Every optimal assignment is a perfect matching on the tight edges of an
    optimal dual, so it suffices to pick, row by row, the smallest tight
    column that still admits a perfect completion.
    """
    n = cost.shape[0]
    scale = np.abs(cost).max() + np.abs(u).max() + np.abs(v).max() + 1.0
    tol = 256 * np.finfo(float).eps * n * scale
    reduced = cost - u[:, None] - v[None, :]
    tight = reduced <= tol
    rows = np.arange(n)
    if not tight[rows, col4row].all():
        return col4row  # duals too noisy to certify ties; keep the solver's answer
    match_r = col4row.copy()
    match_c = np.empty(n, dtype=np.int64)
    match_c[match_r] = rows
    fixed_row = np.zeros(n, dtype=bool)
    taken_col = np.zeros(n, dtype=bool)
    for i in range(n_real):
        cands = np.flatnonzero(tight[i] & ~taken_col)
        for j in cands:
            if j == match_r[i] or _reroute(tight, match_r, match_c, fixed_row, taken_col, i, int(j)):
                break
        fixed_row[i] = True
        taken_col[match_r[i]] = True
    return match_r


def _reroute(tight, match_r, match_c, fixed_row, taken_col, i, j):
    """Try to move row ``i`` onto column ``j`` via an alternating path; apply if found."""
    freed = match_r[i]
    start = match_c[j]
    blocked = taken_col.copy()
    blocked[j] = True
    parent = {start: (-1, -1)}  # row -> (previous row, column it takes)
    q = deque([start])
    seen_col = blocked.copy()
    while q:
        r = q.popleft()
        for c in np.flatnonzero(tight[r] & ~seen_col):
            seen_col[c] = True
            if c == freed:
                # unwind: r takes c, its parent takes r's old column, ...
                take = c
                while r != -1:
                    prev, _ = parent[r]
                    old = match_r[r]
                    match_r[r] = take
                    match_c[take] = r
                    take, r = old, prev
                match_r[i] = j
                match_c[j] = i
                return True
            nr = match_c[c]
            if nr == i or fixed_row[nr] or nr in parent:
                continue
            parent[nr] = (r, c)
            q.append(nr)
    return False


def pairwise_sq_dist(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d = a[:, None, :] - b[None, :, :]
    out = d[..., 0] * d[..., 0] + d[..., 1] * d[..., 1]
    return out + d[..., 2] * d[..., 2]


def match_to_sphere_grid(points, grid: SphereGrid) -> MatchingMap:
    """Assign every point to a distinct grid point minimising total squared distance."""
    points = np.asarray(points, dtype=np.float64)
    if len(points) > grid.N:
        raise AssignmentError(f"{len(points)} points exceed grid size {grid.N}")
    return solve_unbalanced_assignment(pairwise_sq_dist(points, grid.points))
