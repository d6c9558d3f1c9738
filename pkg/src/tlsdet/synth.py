"""Synthetic slide scenes: clustered lymphocytes with ground-truth TLS boxes.

Randomness comes from numpy's PCG64 bit generator seeded through
``SeedSequence(seed)``. The sequence is spawned into three child streams
(cluster centers, cluster members, background) so each part of a scene can
be regenerated on its own and the draw order is fixed.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .core import BoundingBox, GridSpec, Label, NucleusTable
from .errors import InfeasiblePacking, InvalidSpec

MAX_PLACEMENT_ATTEMPTS = 10_000


@dataclass(frozen=True)
class SceneParams:
    extent_um: tuple[float, float] = (4000.0, 4000.0)
    n_clusters: int = 5
    cluster_radius_um: float = 80.0
    nuclei_per_cluster: float = 100.0
    background_rate: float = 50.0  # nuclei per mm^2
    non_lymphocyte_fraction: float = 0.5
    seed: int = 0
    pitch_um: float = 0.5
    patch_size_px: int = 32

    def __post_init__(self):
        object.__setattr__(self, "extent_um", tuple(float(v) for v in self.extent_um))
        w, h = self.extent_um
        if not (w > 0 and h > 0):
            raise InvalidSpec("scene extent must be positive")
        if self.n_clusters < 0 or self.nuclei_per_cluster < 0 or self.background_rate < 0:
            raise InvalidSpec("cluster count and rates must be non-negative")
        if self.n_clusters and not self.cluster_radius_um > 0:
            raise InvalidSpec("cluster radius must be positive")
        if not 0.0 <= self.non_lymphocyte_fraction <= 1.0:
            raise InvalidSpec("non-lymphocyte fraction must lie in [0, 1]")
        if not 0 <= self.seed < 2 ** 64:
            raise InvalidSpec("seed must be a 64-bit unsigned integer")

    @property
    def grid_spec(self) -> GridSpec:
        return GridSpec.from_extent(*self.extent_um, self.pitch_um, self.patch_size_px)

    @property
    def area_mm2(self) -> float:
        return self.extent_um[0] * self.extent_um[1] / 1e6

    def to_dict(self) -> dict:
        d = asdict(self)
        d["extent_um"] = list(self.extent_um)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SceneParams":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise InvalidSpec(f"unknown scene parameters: {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True, eq=False)
class Scene:
    params: SceneParams
    nuclei: NucleusTable
    boxes: list
    centers: np.ndarray
    cluster_sizes: np.ndarray

    @property
    def n_cluster_nuclei(self) -> int:
        return int(self.cluster_sizes.sum())


def _place_centers(rng: np.random.Generator, n: int, w: float, h: float, radius: float) -> np.ndarray:
    centers = np.empty((n, 2))
    placed = attempts = 0
    min_d2 = (2 * radius) ** 2
    while placed < n:
        if attempts >= MAX_PLACEMENT_ATTEMPTS:
            raise InfeasiblePacking(
                f"placed {placed} of {n} clusters in {MAX_PLACEMENT_ATTEMPTS} attempts")
        attempts += 1
        c = rng.uniform((0.0, 0.0), (w, h))
        if placed and np.min(np.sum((centers[:placed] - c) ** 2, axis=1)) < min_d2:
            continue
        centers[placed] = c
        placed += 1
    return centers


def generate_scene(params: SceneParams) -> Scene:
    """Thomas-type cluster scene plus uniform background of both classes.

    Members are Gaussian around their center with sigma = radius / 2; draws
    that land outside the slide are discarded. Each non-empty cluster yields
    a box spanning its members' pixels, padded by one density patch and clipped
    to the slide.
    """
    w, h = params.extent_um
    spec = params.grid_spec
    centers_rng, members_rng, bg_rng = (
        np.random.Generator(np.random.PCG64(s))
        for s in np.random.SeedSequence(params.seed).spawn(3))

    centers = _place_centers(centers_rng, params.n_clusters, w, h, params.cluster_radius_um)
    sigma = params.cluster_radius_um / 2
    xs, ys, sizes, boxes = [], [], [], []
    pad = params.patch_size_px
    for cx, cy in centers:
        k = members_rng.poisson(params.nuclei_per_cluster)
        pts = members_rng.normal((cx, cy), sigma, size=(k, 2))
        pts = pts[(pts[:, 0] >= 0) & (pts[:, 0] < w) & (pts[:, 1] >= 0) & (pts[:, 1] < h)]
        sizes.append(len(pts))
        if len(pts) == 0:
            continue
        xs.append(pts[:, 0])
        ys.append(pts[:, 1])
        px = np.floor(pts / params.pitch_um).astype(np.int64)
        box = BoundingBox(px[:, 0].min() - pad, px[:, 1].min() - pad,
                          px[:, 0].max() + pad, px[:, 1].max() + pad)
        boxes.append(box.clipped(spec.width_px, spec.height_px))
    n_cluster = int(sum(sizes))

    n_bg = bg_rng.poisson(params.background_rate * params.area_mm2)
    bg = bg_rng.uniform((0.0, 0.0), (w, h), size=(n_bg, 2))
    bg_labels = np.where(bg_rng.random(n_bg) < params.non_lymphocyte_fraction,
                         Label.NON_LYMPHOCYTE, Label.LYMPHOCYTE).astype(np.int8)

    x = np.concatenate(xs + [bg[:, 0]]) if xs else bg[:, 0]
    y = np.concatenate(ys + [bg[:, 1]]) if ys else bg[:, 1]
    labels = np.concatenate([np.full(n_cluster, Label.LYMPHOCYTE, dtype=np.int8), bg_labels])
    # the pixel grid may cover slightly less than the extent when it is not a pitch multiple
    x = np.minimum(x, math.nextafter(spec.width_px * params.pitch_um, 0))
    y = np.minimum(y, math.nextafter(spec.height_px * params.pitch_um, 0))
    return Scene(params, NucleusTable.from_arrays(x, y, labels), boxes,
                 centers, np.asarray(sizes, dtype=np.int64))
