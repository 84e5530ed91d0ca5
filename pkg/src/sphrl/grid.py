"""Uniform cell grid for cutoff-radius neighbor search.

Reference implementation in plain numpy; the simulation hot path uses the
compiled equivalent in :mod:`sphrl.loops`, which is tested against this one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class CellGrid:
    """Bucketed particle indices on a uniform grid of cells >= cutoff wide.

    Queries return a superset of all pairs closer than the cutoff; callers
    filter by actual distance.
    """

    cell_size: float
    origin: np.ndarray
    shape: tuple[int, int]
    buckets: dict
    n_points: int

    def cell_of(self, point) -> tuple[int, int]:
        p = np.asarray(point, dtype=np.float64)
        cx = int(np.floor((p[0] - self.origin[0]) / self.cell_size))
        cy = int(np.floor((p[1] - self.origin[1]) / self.cell_size))
        return cx, cy

    def candidates_near(self, point) -> np.ndarray:
        """Indices of all particles in the 3x3 block of cells around point."""
        cx, cy = self.cell_of(point)
        out = []
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                out.extend(self.buckets.get((cx + dx, cy + dy), ()))
        return np.array(sorted(out), dtype=np.int64)

    def candidate_pairs(self) -> np.ndarray:
        """All index pairs (i, j) with i < j from neighboring cells; a
        superset of the pairs within the cutoff."""
        pairs = []
        for (cx, cy), members in self.buckets.items():
            for dx in (-1, 0, 1):
                for dy in (-1, 0, 1):
                    other = self.buckets.get((cx + dx, cy + dy))
                    if other is None:
                        continue
                    for i in members:
                        for j in other:
                            if i < j:
                                pairs.append((i, j))
        if not pairs:
            return np.empty((0, 2), dtype=np.int64)
        return np.unique(np.array(pairs, dtype=np.int64), axis=0)


def build_cell_grid(positions: np.ndarray, cutoff: float) -> CellGrid:
    """Bucket particle positions into cells of size cutoff.

    An empty position list yields an empty grid.
    """
    if cutoff <= 0.0:
        raise ValueError(f"cutoff must be positive, got {cutoff}")
    positions = np.asarray(positions, dtype=np.float64).reshape(-1, 2)
    n = positions.shape[0]
    if n == 0:
        return CellGrid(cutoff, np.zeros(2), (0, 0), {}, 0)
    origin = positions.min(axis=0)
    cells = np.floor((positions - origin) / cutoff).astype(np.int64)
    shape = (int(cells[:, 0].max()) + 1, int(cells[:, 1].max()) + 1)
    buckets: dict = {}
    for idx in range(n):
        buckets.setdefault((int(cells[idx, 0]), int(cells[idx, 1])), []).append(idx)
    return CellGrid(cutoff, origin, shape, buckets, n)


def pairs_within(positions: np.ndarray, cutoff: float, grid: CellGrid | None = None) -> np.ndarray:
    """Exact set of index pairs (i < j) with |r_i - r_j| < cutoff."""
    positions = np.asarray(positions, dtype=np.float64).reshape(-1, 2)
    if grid is None:
        grid = build_cell_grid(positions, cutoff)
    cand = grid.candidate_pairs()
    if cand.shape[0] == 0:
        return cand
    d = positions[cand[:, 0]] - positions[cand[:, 1]]
    keep = d[:, 0] ** 2 + d[:, 1] ** 2 < cutoff**2
    return cand[keep]


def brute_force_pairs(positions: np.ndarray, cutoff: float) -> np.ndarray:
    """O(N^2) all-pairs oracle used by the tests."""
    positions = np.asarray(positions, dtype=np.float64).reshape(-1, 2)
    n = positions.shape[0]
    pairs = []
    for i in range(n):
        d = positions[i + 1 :] - positions[i]
        close = np.nonzero(d[:, 0] ** 2 + d[:, 1] ** 2 < cutoff**2)[0]
        pairs.extend((i, i + 1 + int(j)) for j in close)
    if not pairs:
        return np.empty((0, 2), dtype=np.int64)
    return np.array(pairs, dtype=np.int64)
