"""Forward reference computations of the segmentation and DANN training losses.

Nothing here computes gradients. The functions score externally produced
predictions and serve as ground truth when checking a training implementation.
All reductions go through ``numpy.sum`` (pairwise summation), so results do not
depend on how callers chunk their data.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import as_mask
from .errors import DimMismatch, NoLabeledSamples
from .sdt import sdf

DICE_EPS = 1e-6
PROB_FLOOR = 1e-12


def _flat(a, name: str) -> np.ndarray:
    arr = np.asarray(a, dtype=np.float64).ravel()
    if np.isnan(arr).any():
        raise ValueError(f"{name} contains NaN")
    return arr


def _check_binary(g: np.ndarray):
    if not np.isin(g, (0.0, 1.0)).all():
        raise ValueError("ground truth must be binary")


def sdf_loss(pred_mask, gt_mask) -> float:
    """Mean squared difference between the two masks' signed distance fields."""
    pred, gt = as_mask(pred_mask), as_mask(gt_mask)
    if pred.shape != gt.shape:
        raise DimMismatch(f"mask shapes differ: {pred.shape} vs {gt.shape}")
    diff = sdf(pred).values - sdf(gt).values
    return float(np.sum(diff * diff) / diff.size)


def dice_loss(s, g, eps: float = DICE_EPS) -> float:
    """Negative soft Dice, ``-2 sum(s g) / (sum(s^2) + sum(g^2) + eps)``.

    Lies in ``[-1, 0]``; two empty inputs give 0.
    """
    s, g = _flat(s, "s"), _flat(g, "g")
    if s.shape != g.shape:
        raise DimMismatch(f"length mismatch: {s.size} vs {g.size}")
    if ((s < 0) | (s > 1)).any():
        raise ValueError("predicted probabilities must lie in [0, 1]")
    _check_binary(g)
    return float(-2.0 * np.sum(s * g) / (np.sum(s * s) + np.sum(g * g) + eps))


def softmax2(logits) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    if z.ndim < 1 or z.shape[-1] != 2:
        raise DimMismatch("logits need a trailing axis of length 2 (background, foreground)")
    z = z.reshape(-1, 2)
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def logits_from_probs(p) -> np.ndarray:
    """Two-channel logits whose softmax recovers foreground probability ``p``."""
    p = np.clip(_flat(p, "p"), PROB_FLOOR, 1.0)
    q = np.clip(1.0 - p, PROB_FLOOR, 1.0)
    return np.stack([np.log(q), np.log(p)], axis=1)


def ce_loss(logits, g) -> float:
    """Two-class cross-entropy of softmax(logits) against binary targets, averaged per pixel."""
    p = np.clip(softmax2(logits), PROB_FLOOR, 1.0)
    g = _flat(g, "g")
    if p.shape[0] != g.size:
        raise DimMismatch(f"{p.shape[0]} logit pairs for {g.size} targets")
    _check_binary(g)
    ll = g * np.log(p[:, 1]) + (1.0 - g) * np.log(p[:, 0])
    return float(-np.sum(ll) / g.size)


@dataclass(frozen=True)
class LossTerms:
    dice: float
    ce: float
    sdf: float

    @property
    def total(self) -> float:
        return self.dice + self.ce + self.sdf

    def to_dict(self) -> dict:
        return {"L_Dice": self.dice, "L_CE": self.ce, "L_SDF": self.sdf, "L_total": self.total}


def total_loss(pred_mask, gt_mask, probs=None, logits=None) -> LossTerms:
    """Unweighted sum of Dice, cross-entropy and SDF losses.

    ``probs`` defaults to the predicted mask itself and ``logits`` to
    :func:`logits_from_probs` of ``probs``; targets are the ground-truth mask.
    """
    pred, gt = as_mask(pred_mask), as_mask(gt_mask)
    if pred.shape != gt.shape:
        raise DimMismatch(f"mask shapes differ: {pred.shape} vs {gt.shape}")
    g = gt.bits.ravel().astype(np.float64)
    s = pred.bits.ravel().astype(np.float64) if probs is None else _flat(probs, "probs")
    if logits is None:
        logits = logits_from_probs(s)
    return LossTerms(dice_loss(s, g), ce_loss(logits, g), sdf_loss(pred, gt))


@dataclass(frozen=True, eq=False)
class DannBatch:
    """Per-sample probabilities from a domain-adversarial classifier.

    ``class_label`` is 0/1 for labeled (source-domain) samples and -1 where the
    category is unknown.
    """

    class_prob: np.ndarray
    class_label: np.ndarray
    domain_prob: np.ndarray
    domain_label: np.ndarray

    def __post_init__(self):
        arrays = {}
        for name in ("class_prob", "class_label", "domain_prob", "domain_label"):
            arrays[name] = np.asarray(getattr(self, name)).ravel()
        sizes = {a.size for a in arrays.values()}
        if len(sizes) != 1:
            raise DimMismatch("all DannBatch columns must have length M")
        if not np.isin(arrays["class_label"], (-1, 0, 1)).all():
            raise ValueError("class labels must be 0, 1 or -1 (unlabeled)")
        if not np.isin(arrays["domain_label"], (0, 1)).all():
            raise ValueError("domain labels must be 0 or 1")
        for name in ("class_prob", "domain_prob"):
            p = arrays[name].astype(np.float64)
            if ((p < 0) | (p > 1)).any() or np.isnan(p).any():
                raise ValueError(f"{name} must lie in [0, 1]")
            arrays[name] = p
        for name, arr in arrays.items():
            object.__setattr__(self, name, arr)

    @property
    def size(self) -> int:
        return self.class_prob.size


def dann_cls_loss(batch: DannBatch) -> float:
    labeled = batch.class_label >= 0
    if not labeled.any():
        raise NoLabeledSamples("classification loss needs labeled source samples")
    y = batch.class_label[labeled].astype(np.float64)
    # only positive samples contribute, exactly as the loss is written
    p = np.clip(batch.class_prob[labeled], PROB_FLOOR, 1.0)
    return float(np.sum(y * -np.log(p)))


def dann_adv_loss(batch: DannBatch) -> float:
    """Binary cross-entropy of the domain discriminator, summed over samples."""
    d = batch.domain_label.astype(np.float64)
    p = np.clip(batch.domain_prob, PROB_FLOOR, 1.0)
    q = np.clip(1.0 - batch.domain_prob, PROB_FLOOR, 1.0)
    return float(np.sum(d * -np.log(p) + (1.0 - d) * -np.log(q)))


def dann_total(batch: DannBatch) -> float:
    return dann_cls_loss(batch) + dann_adv_loss(batch)
