"""Strict and generalized detection scores on a small hand-made scene."""
import numpy as np

from tlsdet import BoundingBox, MatchCriterion, evaluate, f_beta, gf_beta

# %% one long component spanning two ground-truth boxes
mask = np.zeros((20, 40), bool)
mask[6:12, 3:18] = True
boxes = [BoundingBox(2, 5, 8, 12), BoundingBox(12, 5, 18, 12)]
report = evaluate(mask, boxes)
print(report.to_dict()["counts"])
print(report.to_dict()["metrics"])
# one-to-one matching loses a box (R = 0.5); the generalized box recall does not (BR = 1)

# %% two fragments inside one box
mask = np.zeros((20, 40), bool)
mask[7:13, 6:13] = True
mask[7:13, 20:29] = True
print(evaluate(mask, [BoundingBox(5, 5, 30, 15)]).to_dict()["counts"])

# %% stricter overlap rules are available
print(evaluate(mask, [BoundingBox(5, 5, 30, 15)], MatchCriterion.parse("iou:0.5")).to_dict()["counts"])

# %% F-beta from precision/recall pairs (percentages)
print(round(100 * f_beta(0.7821, 0.8434, 1), 2), round(100 * f_beta(0.7821, 0.8434, 2), 2))
print(round(100 * gf_beta(0.8480, 0.8795, 1), 2), round(100 * gf_beta(0.8480, 0.8795, 2), 2))
