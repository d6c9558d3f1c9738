"""Domain types and raster containers shared across the package.

Rasters are stored row-major as ``(rows, cols)`` numpy arrays, i.e. ``[y, x]``.
All containers freeze their backing array on construction, so instances can be
handed to worker threads without copying.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DimMismatch, InvalidSpec, ParseError

RASTER_DTYPE = np.float32


def _frozen(arr: np.ndarray, dtype=None) -> np.ndarray:
    out = np.array(arr, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


class Label(enum.IntEnum):
    LYMPHOCYTE = 0
    NON_LYMPHOCYTE = 1
    UNKNOWN = 2

    @property
    def token(self) -> str:
        return _LABEL_TOKENS[self]

    @classmethod
    def parse(cls, text: str) -> "Label":
        key = text.strip().lower().replace("_", "").replace("-", "")
        try:
            return _TOKEN_LOOKUP[key]
        except KeyError:
            raise ParseError(f"unknown nucleus label {text!r}") from None


_LABEL_TOKENS = {
    Label.LYMPHOCYTE: "Lymphocyte",
    Label.NON_LYMPHOCYTE: "NonLymphocyte",
    Label.UNKNOWN: "Unknown",
}
_TOKEN_LOOKUP = {v.lower(): k for k, v in _LABEL_TOKENS.items()}


@dataclass(frozen=True)
class NucleusRecord:
    """A detected nucleus, positioned in micrometers from the slide origin."""

    x_um: float
    y_um: float
    label: Label
    confidence: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.x_um) and math.isfinite(self.y_um)):
            raise ValueError("nucleus coordinates must be finite")
        if self.x_um < 0 or self.y_um < 0:
            raise ValueError("nucleus coordinates must be non-negative")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError("confidence must lie in [0, 1]")
        object.__setattr__(self, "label", Label(self.label))


@dataclass(frozen=True, eq=False)
class NucleusTable:
    """Columnar nuclei; the fast path for gridding millions of detections."""

    x_um: np.ndarray
    y_um: np.ndarray
    label: np.ndarray
    confidence: np.ndarray

    def __post_init__(self):
        x = _frozen(self.x_um, np.float64)
        y = _frozen(self.y_um, np.float64)
        lab = _frozen(self.label, np.int8)
        conf = _frozen(self.confidence, np.float64)
        if not (x.shape == y.shape == lab.shape == conf.shape) or x.ndim != 1:
            raise DimMismatch("nucleus columns must be 1-D and equally long")
        if x.size:
            if not (np.isfinite(x).all() and np.isfinite(y).all()):
                raise ValueError("nucleus coordinates must be finite")
            if (x < 0).any() or (y < 0).any():
                raise ValueError("nucleus coordinates must be non-negative")
            if ((conf < 0) | (conf > 1)).any():
                raise ValueError("confidence must lie in [0, 1]")
            if not np.isin(lab, [int(v) for v in Label]).all():
                raise ValueError("unknown label code")
        for name, arr in (("x_um", x), ("y_um", y), ("label", lab), ("confidence", conf)):
            object.__setattr__(self, name, arr)

    @classmethod
    def from_arrays(cls, x_um, y_um, label, confidence=None) -> "NucleusTable":
        x_um = np.asarray(x_um, dtype=np.float64)
        if confidence is None:
            confidence = np.ones_like(x_um)
        label = np.broadcast_to(np.asarray(label, dtype=np.int8), x_um.shape)
        return cls(x_um, np.asarray(y_um, dtype=np.float64), label, np.asarray(confidence))

    @classmethod
    def from_records(cls, records: Iterable[NucleusRecord]) -> "NucleusTable":
        records = list(records)
        return cls(
            np.array([r.x_um for r in records], dtype=np.float64),
            np.array([r.y_um for r in records], dtype=np.float64),
            np.array([int(r.label) for r in records], dtype=np.int8),
            np.array([r.confidence for r in records], dtype=np.float64),
        )

    def records(self) -> list[NucleusRecord]:
        return [
            NucleusRecord(float(x), float(y), Label(int(lab)), float(c))
            for x, y, lab, c in zip(self.x_um, self.y_um, self.label, self.confidence)
        ]

    def __len__(self) -> int:
        return int(self.x_um.size)


def as_table(nuclei) -> NucleusTable:
    if isinstance(nuclei, NucleusTable):
        return nuclei
    return NucleusTable.from_records(nuclei)


@dataclass(frozen=True)
class GridSpec:
    """Slide geometry plus the side length ``d`` of a density patch in pixels."""

    width_px: int
    height_px: int
    pitch_um: float
    patch_size_px: int = 32

    def __post_init__(self):
        if self.patch_size_px < 1:
            raise InvalidSpec("patch size must be >= 1")
        if self.width_px < 1 or self.height_px < 1:
            raise InvalidSpec("slide dimensions must be >= 1 pixel")
        if not (self.pitch_um > 0 and math.isfinite(self.pitch_um)):
            raise InvalidSpec("pixel pitch must be positive")

    @property
    def rows(self) -> int:
        return -(-self.height_px // self.patch_size_px)

    @property
    def cols(self) -> int:
        return -(-self.width_px // self.patch_size_px)

    @property
    def shape(self) -> tuple[int, int]:
        return self.rows, self.cols

    @classmethod
    def from_extent(cls, width_um: float, height_um: float, pitch_um: float,
                    patch_size_px: int = 32) -> "GridSpec":
        if pitch_um <= 0:
            raise InvalidSpec("pixel pitch must be positive")
        return cls(int(math.ceil(width_um / pitch_um)), int(math.ceil(height_um / pitch_um)),
                   pitch_um, patch_size_px)

    def to_dict(self) -> dict:
        return {
            "width_px": self.width_px,
            "height_px": self.height_px,
            "pitch_um": self.pitch_um,
            "patch_size_px": self.patch_size_px,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GridSpec":
        try:
            return cls(int(d["width_px"]), int(d["height_px"]), float(d["pitch_um"]),
                       int(d["patch_size_px"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"malformed grid spec: {exc}") from None


@dataclass(frozen=True, eq=False)
class CountGrid:
    values: np.ndarray
    spec: GridSpec

    def __post_init__(self):
        v = _frozen(self.values, np.int64)
        if v.shape != self.spec.shape:
            raise DimMismatch(f"count grid {v.shape} does not match spec {self.spec.shape}")
        if (v < 0).any():
            raise ValueError("counts must be non-negative")
        object.__setattr__(self, "values", v)

    @property
    def total(self) -> int:
        return int(self.values.sum())


def make_grid(spec: GridSpec) -> CountGrid:
    """Zero-initialized count grid of ``ceil(H/d) x ceil(W/d)`` patches."""
    if not isinstance(spec, GridSpec):
        raise InvalidSpec("expected a GridSpec")
    return CountGrid(np.zeros(spec.shape, dtype=np.int64), spec)


def _check_gray(v: np.ndarray):
    if v.size and (np.isnan(v).any() or v.min() < 0 or v.max() > 255):
        raise ValueError("raster values must lie in [0, 255]")


@dataclass(frozen=True, eq=False)
class DensityMap:
    """Normalized lymphocyte density per patch, in gray levels [0, 255]."""

    values: np.ndarray
    spec: GridSpec
    n_min: int = 0
    n_max: int = 0

    def __post_init__(self):
        v = _frozen(self.values, RASTER_DTYPE)
        if v.shape != self.spec.shape:
            raise DimMismatch(f"density map {v.shape} does not match spec {self.spec.shape}")
        _check_gray(v)
        object.__setattr__(self, "values", v)


@dataclass(frozen=True, eq=False)
class AttentionMap:
    """Reversed density (``255 - D``) so aggregates appear dark, like stained tissue."""

    values: np.ndarray
    spec: GridSpec | None = None

    def __post_init__(self):
        v = _frozen(self.values, RASTER_DTYPE)
        if v.ndim != 2:
            raise DimMismatch("attention map must be 2-D")
        _check_gray(v)
        object.__setattr__(self, "values", v)


@dataclass(frozen=True, eq=False)
class BinaryMask:
    bits: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.bits)
        if b.ndim != 2 or b.shape[0] < 1 or b.shape[1] < 1:
            raise DimMismatch("mask must be a non-empty 2-D array")
        object.__setattr__(self, "bits", _frozen(b != 0, bool))

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.bits.shape

    @property
    def size(self) -> int:
        return self.bits.size


def as_mask(mask) -> BinaryMask:
    return mask if isinstance(mask, BinaryMask) else BinaryMask(np.asarray(mask))


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box with inclusive integer pixel bounds."""

    x_min: int
    y_min: int
    x_max: int
    y_max: int

    def __post_init__(self):
        for name in ("x_min", "y_min", "x_max", "y_max"):
            object.__setattr__(self, name, int(getattr(self, name)))
        if self.x_min > self.x_max or self.y_min > self.y_max:
            raise ValueError(f"degenerate box {self}")

    @property
    def area(self) -> int:
        return (self.x_max - self.x_min + 1) * (self.y_max - self.y_min + 1)

    def scaled_down(self, d: int) -> "BoundingBox":
        """The box in patch coordinates of a grid with patch side ``d``."""
        return BoundingBox(self.x_min // d, self.y_min // d, self.x_max // d, self.y_max // d)

    def clipped(self, width: int, height: int) -> "BoundingBox":
        return BoundingBox(max(self.x_min, 0), max(self.y_min, 0),
                           min(self.x_max, width - 1), min(self.y_max, height - 1))

    def shifted(self, dx: int, dy: int) -> "BoundingBox":
        return BoundingBox(self.x_min + dx, self.y_min + dy, self.x_max + dx, self.y_max + dy)

    def to_dict(self) -> dict:
        return {"x_min": self.x_min, "y_min": self.y_min, "x_max": self.x_max, "y_max": self.y_max}

    @classmethod
    def from_dict(cls, d: dict) -> "BoundingBox":
        try:
            return cls(d["x_min"], d["y_min"], d["x_max"], d["y_max"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"malformed box {d!r}: {exc}") from None


@dataclass(frozen=True, eq=False)
class MultiChannelImage:
    """``(rows, cols, channels)`` gray-level stack with named channels."""

    values: np.ndarray
    channel_names: Sequence[str] = field(default=("R", "G", "B"))

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim == 2:
            v = v[..., None]
        if v.ndim != 3:
            raise DimMismatch("multichannel image must be (rows, cols, channels)")
        names = tuple(self.channel_names)
        if len(names) != v.shape[2]:
            raise DimMismatch(f"{len(names)} channel names for {v.shape[2]} channels")
        v = _frozen(v, RASTER_DTYPE)
        _check_gray(v)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "channel_names", names)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape[:2]

    @property
    def n_channels(self) -> int:
        return self.values.shape[2]

    def channel(self, name_or_index) -> np.ndarray:
        idx = (self.channel_names.index(name_or_index)
               if isinstance(name_or_index, str) else int(name_or_index))
        return self.values[:, :, idx]


def quantize_u8(values: np.ndarray) -> np.ndarray:
    """Round half away from zero and clamp to ``uint8``; used only at export."""
    v = np.asarray(values, dtype=np.float64)
    q = np.sign(v) * np.floor(np.abs(v) + 0.5)
    return np.clip(q, 0, 255).astype(np.uint8)
