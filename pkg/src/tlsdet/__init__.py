"""Non-neural building blocks for tertiary lymphoid structure (TLS) detection.

Lymphocyte density maps and their attention reversal, exact signed distance
fields and the segmentation losses built on them, one-to-one and relaxed
detection metrics, and the rank statistics used to relate TLS density to
clinical groups.
"""
from .core import (AttentionMap, BinaryMask, BoundingBox, CountGrid, DensityMap, GridSpec, Label,
                   MultiChannelImage, NucleusRecord, NucleusTable, make_grid)
from .density import assemble_input, count_nuclei, density_map, lda, mean_pool, normalize_density
from .errors import ContractError
from .losses import (DannBatch, ce_loss, dann_adv_loss, dann_cls_loss, dann_total, dice_loss,
                     logits_from_probs, sdf_loss, total_loss)
from .metrics import (Component, DetectionCounts, MatchCriterion, connected_components,
                      detection_counts, evaluate, f_beta, gf_beta, precision_recall, sp_br)
from .pipeline import evaluate_density, otsu_mask
from .sdt import SdfField, boundary, edt_sq, sdf
from .stats import (Group, PatientDensity, group_compare, mann_whitney_u, shapiro_wilk,
                    tls_density)
from .synth import SceneParams, generate_scene

__version__ = "0.1.0"
