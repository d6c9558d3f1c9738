"""Density-only TLS candidate detection, used as an end-to-end baseline."""
from __future__ import annotations

from typing import Sequence

import numpy as np
from skimage.filters import threshold_otsu

from .core import BinaryMask, BoundingBox, DensityMap
from .metrics import ANY_OVERLAP, EvalReport, MatchCriterion, evaluate


def otsu_mask(density: DensityMap) -> BinaryMask:
    """Patches whose density exceeds the Otsu level; all-background for a flat map."""
    v = density.values
    if v.min() == v.max():
        return BinaryMask(np.zeros(v.shape, dtype=bool))
    return BinaryMask(v > threshold_otsu(v))


def boxes_to_grid(boxes: Sequence[BoundingBox], patch_size_px: int) -> list[BoundingBox]:
    return [b.scaled_down(patch_size_px) for b in boxes]


def evaluate_density(density: DensityMap, boxes_px: Sequence[BoundingBox],
                     criterion: MatchCriterion = ANY_OVERLAP) -> EvalReport:
    """Score Otsu-thresholded density blobs against slide-pixel boxes."""
    grid_boxes = boxes_to_grid(boxes_px, density.spec.patch_size_px)
    return evaluate(otsu_mask(density), grid_boxes, criterion)
