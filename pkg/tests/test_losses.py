import math

import numpy as np
import pytest

from oracles import brute_sdf
from tlsdet.core import BinaryMask
from tlsdet.errors import DimMismatch, NoLabeledSamples
from tlsdet.losses import (DannBatch, LossTerms, ce_loss, dann_adv_loss, dann_cls_loss, dann_total,
                           dice_loss, logits_from_probs, sdf_loss, softmax2, total_loss)

LN2 = math.log(2)


def disk(shape, center, radius):
    yy, xx = np.mgrid[: shape[0], : shape[1]]
    return (yy - center[0]) ** 2 + (xx - center[1]) ** 2 <= radius ** 2


# --- SDF loss ---------------------------------------------------------------

def test_sdf_loss_identical(rng):
    m = rng.random((20, 20)) < 0.3
    assert sdf_loss(m, m) == 0


def test_sdf_loss_both_empty():
    z = np.zeros((6, 6), bool)
    assert sdf_loss(z, z) == 0


def test_sdf_loss_shifted_pixel_frozen():
    a = np.zeros((3, 3), bool)
    a[1, 1] = True
    b = np.zeros((3, 3), bool)
    b[1, 2] = True
    oracle = float(np.mean((brute_sdf(a) - brute_sdf(b)) ** 2))
    closed_form = (29 - 4 * math.sqrt(10) - 8 * math.sqrt(2)) / 9
    assert oracle == pytest.approx(closed_form, rel=1e-14)
    assert sdf_loss(a, b) == pytest.approx(0.5596867622601914, rel=1e-14)


def test_sdf_loss_dim_mismatch():
    with pytest.raises(DimMismatch):
        sdf_loss(np.zeros((3, 3)), np.zeros((3, 4)))


def test_sdf_loss_zero_iff_identical(rng):
    for _ in range(30):
        a = rng.random((12, 12)) < 0.4
        b = a.copy()
        b[rng.integers(12), rng.integers(12)] ^= True
        assert sdf_loss(a, b) > 0


def test_sdf_loss_is_geometry_sensitive():
    gt = disk((64, 64), (32, 32), 10)
    near, far = gt.copy(), gt.copy()
    near[32, 45] = True
    far[32, 60] = True
    # identical pixel statistics for Dice, different SDF penalty
    assert dice_loss(near.ravel(), gt.ravel()) == dice_loss(far.ravel(), gt.ravel())
    assert sdf_loss(far, gt) > sdf_loss(near, gt)


# --- Dice ---------------------------------------------------------------------

def test_dice_identity():
    g = np.array([1, 0, 1, 1, 0], float)
    assert dice_loss(g, g) == pytest.approx(-1, abs=1e-6)


def test_dice_disjoint():
    assert dice_loss([1, 1, 0, 0], [0, 0, 1, 1]) == pytest.approx(0, abs=1e-6)


def test_dice_hand_example():
    # -2*1 / (2 + 2)
    assert dice_loss([1, 1, 0, 0], [1, 0, 1, 0]) == pytest.approx(-0.5, abs=1e-6)


def test_dice_both_empty_is_zero():
    assert dice_loss(np.zeros(5), np.zeros(5)) == 0


def test_dice_range(rng):
    for _ in range(200):
        n = rng.integers(1, 50)
        v = dice_loss(rng.random(n), rng.integers(0, 2, n))
        assert -1 <= v <= 0


def test_dice_rejects_mismatch_and_non_binary_gt():
    with pytest.raises(DimMismatch):
        dice_loss([1, 0], [1, 0, 1])
    with pytest.raises(ValueError):
        dice_loss([1, 0], [0.5, 1])


# --- cross-entropy ------------------------------------------------------------

def test_ce_perfect_prediction():
    g = np.array([1, 0, 0, 1])
    logits = np.where(g[:, None] == np.array([0, 1]), 0.0, -1e4)
    assert ce_loss(logits, g) == 0


def test_ce_equal_logits_is_ln2():
    for n in (1, 7, 1000):
        g = np.arange(n) % 2
        assert ce_loss(np.zeros((n, 2)), g) == pytest.approx(LN2, rel=1e-15)


def test_ce_point_nine():
    g = np.array([1, 1, 0, 0, 1])
    p_true = 0.9
    probs_fg = np.where(g == 1, p_true, 1 - p_true)
    assert ce_loss(logits_from_probs(probs_fg), g) == pytest.approx(-math.log(0.9), rel=1e-12)
    assert -math.log(0.9) == pytest.approx(0.105361, abs=1e-6)


def test_ce_non_negative_and_clamped(rng):
    for _ in range(50):
        n = rng.integers(1, 40)
        assert ce_loss(rng.normal(0, 50, (n, 2)), rng.integers(0, 2, n)) >= 0
    assert math.isfinite(ce_loss(np.array([[1e6, -1e6]]), [1]))


def test_softmax_shape_check():
    with pytest.raises(DimMismatch):
        softmax2(np.zeros((4, 3)))


def test_permutation_invariance(rng):
    s, g = rng.random(64), rng.integers(0, 2, 64)
    z = rng.normal(size=(64, 2))
    perm = rng.permutation(64)
    assert dice_loss(s[perm], g[perm]) == pytest.approx(dice_loss(s, g), rel=1e-14)
    assert ce_loss(z[perm], g[perm]) == pytest.approx(ce_loss(z, g), rel=1e-14)


# --- total ----------------------------------------------------------------------

def test_total_perfect():
    gt = disk((16, 16), (8, 8), 5)
    assert total_loss(gt, gt).total == pytest.approx(-1, abs=1e-6)


def test_total_arithmetic():
    assert LossTerms(-0.5, 0.693147, 2.0).total == pytest.approx(2.193147, abs=1e-12)


def test_total_recomposition_bitwise(rng):
    pred = rng.random((24, 24)) < 0.3
    gt = rng.random((24, 24)) < 0.3
    probs = rng.random((24, 24))
    logits = rng.normal(size=(24 * 24, 2))
    t = total_loss(pred, gt, probs=probs, logits=logits)
    g = gt.ravel().astype(float)
    assert t.total == dice_loss(probs, g) + ce_loss(logits, g) + sdf_loss(pred, gt)
    assert t.to_dict()["L_total"] == t.total


def test_total_dim_mismatch():
    with pytest.raises(DimMismatch):
        total_loss(BinaryMask(np.zeros((3, 3))), BinaryMask(np.zeros((4, 3))))


def test_noise_sensitivity_small(rng):
    gt = disk((64, 64), (32, 32), 12)
    base_dice = dice_loss(gt.ravel(), gt.ravel())
    losses = []
    for r in (2, 4, 8, 16):
        pred = gt.copy()
        pred[32, 32 + 12 + r] = True
        losses.append(sdf_loss(pred, gt))
        assert abs(dice_loss(pred.ravel(), gt.ravel()) - base_dice) < 1e-2
    assert all(a < b for a, b in zip(losses, losses[1:]))


# --- DANN -------------------------------------------------------------------


def batch(cp, cl, dp, dl):
    return DannBatch(np.array(cp, float), np.array(cl), np.array(dp, float), np.array(dl))


def test_cls_perfect():
    assert dann_cls_loss(batch([1, 1], [1, 1], [0.5, 0.5], [0, 1])) == 0


def test_cls_half():
    assert dann_cls_loss(batch([0.5], [1], [0.5], [1])) == pytest.approx(LN2, rel=1e-15)


def test_cls_negatives_contribute_nothing():
    assert dann_cls_loss(batch([0.1, 0.7], [0, 0], [0.5, 0.5], [0, 1])) == 0


def test_cls_ignores_unlabeled_and_requires_labels():
    b = batch([0.5, 0.01], [1, -1], [0.5, 0.5], [1, 0])
    assert dann_cls_loss(b) == pytest.approx(LN2)
    with pytest.raises(NoLabeledSamples):
        dann_cls_loss(batch([0.5], [-1], [0.5], [0]))


def test_adv_perfect():
    assert dann_adv_loss(batch([1, 1, 1], [1, 1, 1], [1, 0, 1], [1, 0, 1])) == 0


@pytest.mark.parametrize("d", [0, 1])
def test_adv_half_is_ln2_either_domain(d):
    assert dann_adv_loss(batch([1], [1], [0.5], [d])) == pytest.approx(LN2, rel=1e-15)


def test_adv_depends_on_domain_label():
    b0 = batch([1], [1], [0.9], [0])
    b1 = batch([1], [1], [0.9], [1])
    assert dann_adv_loss(b0) == pytest.approx(-math.log(0.1))
    assert dann_adv_loss(b1) == pytest.approx(-math.log(0.9))


def test_dann_total():
    assert dann_total(batch([1], [1], [1], [1])) == 0
    assert dann_total(batch([0.5], [1], [0.5], [0])) == pytest.approx(2 * LN2, rel=1e-15)


def test_dann_total_recomposition(rng):
    m = 50
    b = batch(rng.random(m), rng.integers(-1, 2, m), rng.random(m), rng.integers(0, 2, m))
    assert dann_total(b) == dann_cls_loss(b) + dann_adv_loss(b)


def test_dann_batch_validation():
    with pytest.raises(DimMismatch):
        batch([0.5, 0.5], [1], [0.5], [1])
    with pytest.raises(ValueError):
        batch([1.5], [1], [0.5], [1])
    with pytest.raises(ValueError):
        batch([0.5], [2], [0.5], [1])
