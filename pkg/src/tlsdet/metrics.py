"""Detection scoring of predicted segmentations against annotated boxes.

Two families of metrics are computed from the same overlap relation:

* classic precision / recall / F-beta over a one-to-one matching (TP), and
* segmentation precision / box recall / general F-beta, which count every
  component touching some box (TPS) and every box touched by some component
  (TPB), so one blob spanning two adjacent annotations is not penalized.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import ndimage

from .core import BoundingBox, as_mask
from .errors import UndefinedMetric

_STRUCTURE = {
    4: ndimage.generate_binary_structure(2, 1),
    8: ndimage.generate_binary_structure(2, 2),
}


@dataclass(frozen=True, eq=False)
class Component:
    """One connected region of a prediction, as arrays of pixel coordinates."""

    rows: np.ndarray
    cols: np.ndarray

    def __post_init__(self):
        if self.rows.size == 0 or self.rows.shape != self.cols.shape:
            raise ValueError("component must be a non-empty pixel set")

    @property
    def size(self) -> int:
        return int(self.rows.size)

    @property
    def extent(self) -> BoundingBox:
        return BoundingBox(self.cols.min(), self.rows.min(), self.cols.max(), self.rows.max())

    def shifted(self, dx: int, dy: int) -> "Component":
        return Component(self.rows + dy, self.cols + dx)


def connected_components(mask, connectivity: int = 8) -> list[Component]:
    """Maximal connected foreground regions, ordered by their first pixel in raster order."""
    if connectivity not in _STRUCTURE:
        raise ValueError("connectivity must be 4 or 8")
    bits = as_mask(mask).bits
    labels, n = ndimage.label(bits, structure=_STRUCTURE[connectivity])
    if n == 0:
        return []
    flat = labels.ravel()
    idx = np.flatnonzero(flat)
    lab = flat[idx]
    # stable sort keeps raster order inside each label
    order = np.argsort(lab, kind="stable")
    idx, lab = idx[order], lab[order]
    splits = np.flatnonzero(np.diff(lab)) + 1
    comps = []
    for chunk in np.split(idx, splits):
        r, c = np.divmod(chunk, bits.shape[1])
        comps.append(Component(r, c))
    comps.sort(key=lambda comp: (comp.rows[0], comp.cols[0]))
    return comps


class MatchMode(enum.Enum):
    ANY_OVERLAP = "any"
    IOU = "iou"
    BOX_COVERAGE = "cover"


@dataclass(frozen=True)
class MatchCriterion:
    """When a component and a box count as overlapping.

    ``ANY_OVERLAP`` needs one shared pixel; ``IOU`` compares intersection over
    union of the pixel sets; ``BOX_COVERAGE`` the fraction of the box covered.
    """

    mode: MatchMode = MatchMode.ANY_OVERLAP
    threshold: float = 1.0

    def __post_init__(self):
        if self.mode is not MatchMode.ANY_OVERLAP and not 0 < self.threshold <= 1:
            raise ValueError("match threshold must lie in (0, 1]")

    @classmethod
    def parse(cls, text: str) -> "MatchCriterion":
        """Parse ``any``, ``iou:0.5`` or ``cover:0.3``."""
        name, _, arg = text.partition(":")
        try:
            mode = MatchMode(name.strip().lower())
        except ValueError:
            raise ValueError(f"unknown match criterion {text!r}") from None
        if mode is MatchMode.ANY_OVERLAP:
            return cls()
        return cls(mode, float(arg))

    def __str__(self) -> str:
        return "any" if self.mode is MatchMode.ANY_OVERLAP else f"{self.mode.value}:{self.threshold:g}"

    def accepts(self, inter: np.ndarray, comp_size: np.ndarray, box_area: np.ndarray) -> np.ndarray:
        if self.mode is MatchMode.ANY_OVERLAP:
            return inter > 0
        if self.mode is MatchMode.IOU:
            union = comp_size + box_area - inter
            return (inter > 0) & (inter >= self.threshold * union)
        return (inter > 0) & (inter >= self.threshold * box_area)


ANY_OVERLAP = MatchCriterion()


def intersection_matrix(components: Sequence[Component], boxes: Sequence[BoundingBox]) -> np.ndarray:
    """``inter[i, j]`` = number of pixels of component i inside box j."""
    inter = np.zeros((len(components), len(boxes)), dtype=np.int64)
    if not boxes:
        return inter
    x0 = np.array([b.x_min for b in boxes])
    x1 = np.array([b.x_max for b in boxes])
    y0 = np.array([b.y_min for b in boxes])
    y1 = np.array([b.y_max for b in boxes])
    for i, comp in enumerate(components):
        ext = comp.extent
        near = np.flatnonzero((x0 <= ext.x_max) & (x1 >= ext.x_min)
                              & (y0 <= ext.y_max) & (y1 >= ext.y_min))
        for j in near:
            inside = ((comp.cols >= x0[j]) & (comp.cols <= x1[j])
                      & (comp.rows >= y0[j]) & (comp.rows <= y1[j]))
            inter[i, j] = int(inside.sum())
    return inter


def overlap_matrix(components, boxes, criterion: MatchCriterion = ANY_OVERLAP) -> tuple[np.ndarray, np.ndarray]:
    inter = intersection_matrix(components, boxes)
    sizes = np.array([c.size for c in components], dtype=np.int64)[:, None]
    areas = np.array([b.area for b in boxes], dtype=np.int64)[None, :]
    return criterion.accepts(inter, sizes, areas), inter


def greedy_matching(overlap: np.ndarray, inter: np.ndarray) -> list[tuple[int, int]]:
    """One-to-one matching by descending intersection area.

    Ties go to the lower component index, then the lower box index.
    """
    ci, bj = np.nonzero(overlap)
    order = np.lexsort((bj, ci, -inter[ci, bj]))
    used_c, used_b, pairs = set(), set(), []
    for k in order:
        i, j = int(ci[k]), int(bj[k])
        if i not in used_c and j not in used_b:
            used_c.add(i)
            used_b.add(j)
            pairs.append((i, j))
    return pairs


@dataclass(frozen=True)
class DetectionCounts:
    tp: int
    fp: int
    fn: int
    tps: int
    tpb: int
    n_components: int
    n_boxes: int
    matches: tuple = field(default=(), compare=False, repr=False)

    def to_dict(self) -> dict:
        return {"TP": self.tp, "FP": self.fp, "FN": self.fn, "TPS": self.tps, "TPB": self.tpb,
                "n_components": self.n_components, "n_boxes": self.n_boxes}


def detection_counts(components: Sequence[Component], boxes: Sequence[BoundingBox],
                     criterion: MatchCriterion = ANY_OVERLAP) -> DetectionCounts:
    components, boxes = list(components), list(boxes)
    n_c, n_b = len(components), len(boxes)
    if n_c == 0 or n_b == 0:
        return DetectionCounts(0, n_c, n_b, 0, 0, n_c, n_b)
    overlap, inter = overlap_matrix(components, boxes, criterion)
    pairs = greedy_matching(overlap, inter)
    tp = len(pairs)
    return DetectionCounts(
        tp=tp, fp=n_c - tp, fn=n_b - tp,
        tps=int(overlap.any(axis=1).sum()), tpb=int(overlap.any(axis=0).sum()),
        n_components=n_c, n_boxes=n_b, matches=tuple(pairs),
    )


def _ratio(num: int, den: int, name: str) -> float:
    if den == 0:
        raise UndefinedMetric(f"{name} undefined: zero denominator")
    return num / den


def precision_recall(counts: DetectionCounts) -> tuple[float, float]:
    """Raises UndefinedMetric if either denominator is zero; see :func:`safe_metrics`."""
    return (_ratio(counts.tp, counts.tp + counts.fp, "precision"),
            _ratio(counts.tp, counts.tp + counts.fn, "recall"))


def sp_br(counts: DetectionCounts) -> tuple[float, float]:
    return (_ratio(counts.tps, counts.n_components, "segmentation precision"),
            _ratio(counts.tpb, counts.n_boxes, "box recall"))


def f_beta(precision: float, recall: float, beta: float = 1.0) -> float:
    if precision == 0 and recall == 0:
        raise UndefinedMetric("F-beta undefined when precision and recall are both zero")
    b2 = beta * beta
    return (1 + b2) * precision * recall / (b2 * precision + recall)


# the general score is the same harmonic form applied to (SP, BR)
gf_beta = f_beta


def _try(fn, *args):
    try:
        return fn(*args)
    except UndefinedMetric:
        return None


@dataclass(frozen=True)
class EvalReport:
    """Counts plus every metric; ``None`` marks an undefined value."""

    counts: DetectionCounts
    criterion: str
    metrics: dict

    def to_dict(self) -> dict:
        return {
            "criterion": self.criterion,
            "counts": self.counts.to_dict(),
            "metrics": {k: ("undefined" if v is None else v) for k, v in self.metrics.items()},
        }


def safe_metrics(counts: DetectionCounts, betas: Sequence[float] = (1.0, 2.0)) -> dict:
    c = counts
    p = _try(_ratio, c.tp, c.tp + c.fp, "P")
    r = _try(_ratio, c.tp, c.tp + c.fn, "R")
    sp = _try(_ratio, c.tps, c.n_components, "SP")
    br = _try(_ratio, c.tpb, c.n_boxes, "BR")
    out = {"P": p, "R": r}
    for b in betas:
        out[f"F{b:g}"] = None if p is None or r is None else _try(f_beta, p, r, b)
    out.update({"SP": sp, "BR": br})
    for b in betas:
        out[f"GF{b:g}"] = None if sp is None or br is None else _try(gf_beta, sp, br, b)
    return out


def evaluate(pred_mask, boxes: Sequence[BoundingBox], criterion: MatchCriterion = ANY_OVERLAP,
             betas: Sequence[float] = (1.0, 2.0), connectivity: int = 8) -> EvalReport:
    comps = connected_components(pred_mask, connectivity)
    counts = detection_counts(comps, boxes, criterion)
    return EvalReport(counts, str(criterion), safe_metrics(counts, betas))

