"""Lymphocyte density maps, attention reversal, pooling and input assembly."""
from __future__ import annotations

from typing import Collection

import numpy as np

from .core import (AttentionMap, CountGrid, DensityMap, GridSpec, Label, MultiChannelImage,
                   RASTER_DTYPE, as_table)
from .errors import DimMismatch, InvalidSpec, OutOfBounds

LYMPHOCYTES = frozenset({Label.LYMPHOCYTE})


def count_nuclei(nuclei, spec: GridSpec,
                 labels: Collection[Label] = LYMPHOCYTES) -> CountGrid:
    """Count nuclei of the selected classes in each ``d x d`` patch.

    A nucleus is binned by the pixel containing its centroid,
    ``(floor(x / pitch), floor(y / pitch))``. Accepts a :class:`NucleusTable`
    or any iterable of :class:`NucleusRecord`.

    Raises:
        OutOfBounds: if any nucleus (whatever its label) falls outside the slide.
    """
    table = as_table(nuclei)
    px = np.floor(table.x_um / spec.pitch_um).astype(np.int64)
    py = np.floor(table.y_um / spec.pitch_um).astype(np.int64)
    outside = (px >= spec.width_px) | (py >= spec.height_px)
    if outside.any():
        i = int(np.flatnonzero(outside)[0])
        raise OutOfBounds(
            f"{int(outside.sum())} nuclei outside the {spec.width_px}x{spec.height_px} px slide; "
            f"first at ({table.x_um[i]}, {table.y_um[i]}) um"
        )
    keep = np.isin(table.label, [int(lab) for lab in labels])
    d = spec.patch_size_px
    flat = (py[keep] // d) * spec.cols + (px[keep] // d)
    counts = np.bincount(flat, minlength=spec.rows * spec.cols)
    return CountGrid(counts.reshape(spec.shape), spec)


def normalize_density(counts: CountGrid) -> DensityMap:
    """Min-max stretch patch counts to ``[0, 255]``; a flat field maps to zero."""
    n = counts.values
    if n.size == 0:
        raise InvalidSpec("empty count grid")
    lo, hi = int(n.min()), int(n.max())
    if hi == lo:
        d = np.zeros(n.shape, dtype=RASTER_DTYPE)
    else:
        d = (255.0 * (n - lo) / (hi - lo)).astype(RASTER_DTYPE)
    return DensityMap(d, counts.spec, lo, hi)


def lda(density: DensityMap) -> AttentionMap:
    """Lymphocyte density attention: ``A = 255 - D`` elementwise."""
    return AttentionMap(RASTER_DTYPE(255.0) - density.values, density.spec)


def mean_pool(image: MultiChannelImage, d: int) -> MultiChannelImage:
    """Average each ``d x d`` tile per channel.

    Edge tiles that are cut short by the image border are averaged over the
    pixels they actually contain; output size is ``ceil(rows/d) x ceil(cols/d)``.
    """
    if d < 1:
        raise InvalidSpec("pooling size must be >= 1")
    v = image.values.astype(np.float64)
    rows, cols = v.shape[:2]
    r_starts = np.arange(0, rows, d)
    c_starts = np.arange(0, cols, d)
    sums = np.add.reduceat(np.add.reduceat(v, r_starts, axis=0), c_starts, axis=1)
    r_len = np.minimum(r_starts + d, rows) - r_starts
    c_len = np.minimum(c_starts + d, cols) - c_starts
    means = sums / (r_len[:, None] * c_len[None, :])[..., None]
    return MultiChannelImage(means.astype(RASTER_DTYPE), image.channel_names)


def assemble_input(pooled_rgb: MultiChannelImage, attention: AttentionMap) -> MultiChannelImage:
    """Stack pooled RGB and the attention map into an (R, G, B, LDA) image."""
    if pooled_rgb.shape != attention.values.shape:
        raise DimMismatch(
            f"pooled image {pooled_rgb.shape} and attention map {attention.values.shape} differ"
        )
    stacked = np.concatenate([pooled_rgb.values, attention.values[..., None]], axis=2)
    return MultiChannelImage(stacked, tuple(pooled_rgb.channel_names) + ("LDA",))


def density_map(nuclei, spec: GridSpec, labels: Collection[Label] = LYMPHOCYTES) -> DensityMap:
    return normalize_density(count_nuclei(nuclei, spec, labels))
