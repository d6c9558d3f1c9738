"""Exact Euclidean distance and signed distance transforms on pixel grids.

The squared transform uses the two-pass separable lower-envelope scheme of
Meijster, Roerdink and Hesselink (2000) carried out entirely in int64, so every
output cell is the exact squared distance to the nearest site.
"""
from __future__ import annotations

import os
from dataclasses import dataclass

import numba
import numpy as np

from .core import BinaryMask, _frozen, as_mask
from .errors import EmptySites

if "NUMBA_THREADING_LAYER_PRIORITY" not in os.environ:
    numba.config.THREADING_LAYER_PRIORITY = ["omp", "tbb", "workqueue"]


@numba.njit(cache=True)
def _column_pass(sites, inf):
    # vertical distance to the nearest site in the same column; rows scanned
    # outermost to keep memory access contiguous
    rows, cols = sites.shape
    g = np.empty((rows, cols), dtype=np.int64)
    for x in range(cols):
        g[0, x] = 0 if sites[0, x] else inf
    for y in range(1, rows):
        for x in range(cols):
            g[y, x] = 0 if sites[y, x] else g[y - 1, x] + 1
    for y in range(rows - 2, -1, -1):
        for x in range(cols):
            if g[y + 1, x] < g[y, x]:
                g[y, x] = g[y + 1, x] + 1
    return g


@numba.njit(cache=True, parallel=True)
def _row_pass(g):
    rows, cols = g.shape
    out = np.empty((rows, cols), dtype=np.int64)
    for y in numba.prange(rows):
        s = np.empty(cols, dtype=np.int64)
        t = np.empty(cols, dtype=np.int64)
        q = 0
        s[0] = 0
        t[0] = 0
        for u in range(1, cols):
            gu = g[y, u] * g[y, u]
            while q >= 0:
                gs = g[y, s[q]] * g[y, s[q]]
                if (t[q] - s[q]) ** 2 + gs > (t[q] - u) ** 2 + gu:
                    q -= 1
                else:
                    break
            if q < 0:
                q = 0
                s[0] = u
            else:
                i = s[q]
                gi = g[y, i] * g[y, i]
                # floor division: first column where u's parabola is strictly lower
                w = 1 + (u * u - i * i + gu - gi) // (2 * (u - i))
                if w < cols:
                    q += 1
                    s[q] = u
                    t[q] = w
        for u in range(cols - 1, -1, -1):
            i = s[q]
            out[y, u] = (u - i) ** 2 + g[y, i] * g[y, i]
            if u == t[q]:
                q -= 1
    return out


def edt_sq(sites) -> np.ndarray:
    """Exact squared Euclidean distance from every pixel to the nearest site.

    Args:
        sites: boolean ``(rows, cols)`` array, True at site pixels.

    Returns:
        int64 array of squared distances.
    """
    sites = np.ascontiguousarray(np.asarray(sites, dtype=bool))
    if sites.ndim != 2:
        raise ValueError("sites must be a 2-D boolean array")
    if not sites.any():
        raise EmptySites("distance transform needs at least one site")
    # larger than any in-frame distance; its square cannot overflow int64
    inf = sites.shape[0] + sites.shape[1] + 1
    return _row_pass(_column_pass(sites, inf))


def boundary(mask) -> np.ndarray:
    """Inner boundary: foreground pixels with a 4-neighbour that is background.

    Pixels beyond the frame count as background, so foreground touching the
    image edge is boundary there.
    """
    b = as_mask(mask).bits
    padded = np.pad(b, 1, constant_values=False)
    interior = (padded[:-2, 1:-1] & padded[2:, 1:-1]
                & padded[1:-1, :-2] & padded[1:-1, 2:])
    return b & ~interior


@dataclass(frozen=True, eq=False)
class SdfField:
    """Signed distance in pixel units: negative inside, zero on the boundary."""

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values, np.float64))

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


def sdf(mask) -> SdfField:
    """Signed distance field of a binary mask relative to its inner boundary.

    An empty mask has no boundary; its field is the constant frame diagonal
    ``sqrt(W**2 + H**2)`` so losses against it stay finite.
    """
    m: BinaryMask = as_mask(mask)
    edge = boundary(m)
    if not edge.any():
        return SdfField(np.full(m.shape, np.hypot(m.width, m.height)))
    dist = np.sqrt(edt_sq(edge).astype(np.float64))
    inside = m.bits & ~edge
    dist[inside] = -dist[inside]
    return SdfField(dist)
