"""Orthonormal 2D Haar analysis operator assembled as a sparse matrix.

Keeping the transform as an explicit matrix means the coefficients touched
by a single pixel are one sparse column, which is what single-site samplers
need.  Coefficient layout of ``W = D @ x``: the approximation block
(``(side >> levels)**2`` entries), then detail blocks from the coarsest level
to the finest, each level ordered horizontal, vertical, diagonal and each
block row-major.  "Horizontal" detail responds to left/right differences.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp


@dataclass(frozen=True)
class DwtOperator:
    side: int
    levels: int
    matrix: sp.csc_matrix

    @property
    def size(self) -> int:
        return self.side * self.side

    def forward(self, x) -> np.ndarray:
        return self.matrix @ np.asarray(x, dtype=np.float64).ravel()

    def inverse(self, w) -> np.ndarray:
        return self.matrix.T @ np.asarray(w, dtype=np.float64).ravel()

    def column(self, k: int):
        m = self.matrix
        sl = slice(m.indptr[k], m.indptr[k + 1])
        return m.indices[sl], m.data[sl]


def _log2_exact(side: int) -> int:
    if side < 1 or side & (side - 1):
        raise ValueError(f"grid side {side} is not a power of two")
    return side.bit_length() - 1


def block_offsets(side: int, levels: int) -> dict:
    """Start index of every coefficient block, keyed ``"a"`` or ``(level, t)``.

    ``level`` counts from 1 (finest) to ``levels`` (coarsest), ``t`` in 1..3.
    """
    offs = {"a": 0}
    pos = (side >> levels) ** 2
    for lev in range(levels, 0, -1):
        n = (side >> lev) ** 2
        for t in (1, 2, 3):
            offs[(lev, t)] = pos
            pos += n
    return offs


@lru_cache(maxsize=16)
def build_dwt(grid_side: int, levels: int | None = None) -> DwtOperator:
    n = _log2_exact(grid_side)
    if levels is None:
        levels = n
    if levels < 1 or levels > n:
        raise ValueError(f"levels must be in [1, {n}] for side {grid_side}")
    offs = block_offsets(grid_side, levels)
    m = grid_side * grid_side
    nnz_per_col = 1 + 3 * levels
    rows = np.empty((m, nnz_per_col), dtype=np.int64)
    vals = np.empty((m, nnz_per_col))

    ii, jj = np.divmod(np.arange(m), grid_side)
    col = 0
    for lev in range(levels, 0, -1):
        nb = grid_side >> lev
        blk = (ii >> lev) * nb + (jj >> lev)
        mag = 1.0 / (1 << lev)
        # sign from the pixel's quadrant inside its level block
        sh = np.where((jj >> (lev - 1)) & 1, -1.0, 1.0)
        sv = np.where((ii >> (lev - 1)) & 1, -1.0, 1.0)
        for t, sgn in ((1, sh), (2, sv), (3, sh * sv)):
            rows[:, col] = offs[(lev, t)] + blk
            vals[:, col] = mag * sgn
            col += 1
    nb = grid_side >> levels
    rows[:, col] = (ii >> levels) * nb + (jj >> levels)
    vals[:, col] = 1.0 / (1 << levels)

    order = np.argsort(rows, axis=1)
    rows = np.take_along_axis(rows, order, axis=1)
    vals = np.take_along_axis(vals, order, axis=1)
    indptr = np.arange(0, m * nnz_per_col + 1, nnz_per_col)
    mat = sp.csc_matrix((vals.ravel(), rows.ravel(), indptr), shape=(m, m))
    mat.has_sorted_indices = True
    return DwtOperator(grid_side, levels, mat)
