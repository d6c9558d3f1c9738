"""File formats read and written by the command line.

* nuclei CSV: header ``x_um,y_um,label[,confidence]``; lines starting with
  ``#`` are comments.
* boxes JSON: a bare array of ``{x_min, y_min, x_max, y_max}`` or an object
  with ``schema_version`` and ``boxes``.
* rasters: little-endian float32, planar (channel, row, col), in ``<stem>.f32``
  next to a ``<stem>.json`` header.
* masks: 8-bit grayscale PNG/PGM holding only 0 and 255.

Every JSON document carries ``schema_version``; a different major version is
rejected. All writers go through a temp file and ``os.replace``.
"""
from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np
from PIL import Image

from .core import BinaryMask, BoundingBox, Label, NucleusTable, quantize_u8
from .errors import ParseError

SCHEMA_VERSION = "1.0"
RASTER_DTYPE = "<f4"


# --- atomic writing ---------------------------------------------------------

def atomic_write_bytes(path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dump_json(obj: dict) -> bytes:
    doc = {"schema_version": SCHEMA_VERSION, **obj}
    return (json.dumps(doc, indent=2, sort_keys=False, allow_nan=False) + "\n").encode()


def write_json(path, obj: dict) -> None:
    atomic_write_bytes(path, dump_json(obj))


def check_schema(doc: dict, where: str = "document") -> dict:
    if not isinstance(doc, dict):
        raise ParseError(f"{where}: expected a JSON object")
    version = doc.get("schema_version")
    if version is None:
        raise ParseError(f"{where}: missing schema_version")
    major = str(version).split(".")[0]
    if major != SCHEMA_VERSION.split(".")[0]:
        raise ParseError(f"{where}: unsupported schema major version {version!r}")
    return doc


def read_json(path) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"{path}: {exc}") from None
    return check_schema(doc, str(path))


# --- nuclei -----------------------------------------------------------------

def format_nuclei_csv(table: NucleusTable, comment: str | None = None) -> bytes:
    buf = io.StringIO()
    if comment:
        for line in comment.splitlines():
            buf.write(f"# {line}\n")
    buf.write("x_um,y_um,label,confidence\n")
    for x, y, lab, c in zip(table.x_um, table.y_um, table.label, table.confidence):
        buf.write(f"{float(x)!r},{float(y)!r},{Label(int(lab)).token},{float(c)!r}\n")
    return buf.getvalue().encode()


def write_nuclei_csv(path, table: NucleusTable, comment: str | None = None) -> None:
    atomic_write_bytes(path, format_nuclei_csv(table, comment))


def read_nuclei_csv(path) -> NucleusTable:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(str(exc)) from None
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise ParseError(f"{path}: missing header")
    reader = csv.DictReader(lines)
    fields = [f.strip() for f in (reader.fieldnames or [])]
    reader.fieldnames = fields
    if fields[:3] != ["x_um", "y_um", "label"] or not set(fields) <= {"x_um", "y_um", "label", "confidence"}:
        raise ParseError(f"{path}: header must be x_um,y_um,label[,confidence]; got {fields}")
    xs, ys, labs, confs = [], [], [], []
    for lineno, row in enumerate(reader, start=2):
        try:
            xs.append(float(row["x_um"]))
            ys.append(float(row["y_um"]))
            labs.append(int(Label.parse(row["label"])))
            c = row.get("confidence")
            confs.append(1.0 if c in (None, "") else float(c))
        except (TypeError, ValueError) as exc:
            raise ParseError(f"{path}: data line {lineno}: {exc}") from None
    try:
        return NucleusTable.from_arrays(xs, ys, np.array(labs, dtype=np.int8), confs)
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from None


# --- boxes ------------------------------------------------------------------

def read_boxes(path) -> list[BoundingBox]:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"{path}: {exc}") from None
    if isinstance(doc, dict):
        check_schema(doc, str(path))
        doc = doc.get("boxes")
    if not isinstance(doc, list):
        raise ParseError(f"{path}: expected a list of boxes")
    return [BoundingBox.from_dict(b) for b in doc]


def write_boxes(path, boxes, **extra) -> None:
    write_json(path, {**extra, "boxes": [b.to_dict() for b in boxes]})


# --- float rasters ----------------------------------------------------------

def raster_paths(path) -> tuple[Path, Path]:
    """``(header.json, data.f32)`` for a raster named by either file or its stem."""
    p = Path(path)
    stem = p.with_suffix("") if p.suffix in (".json", ".f32", ".pgm") else p
    return stem.with_suffix(".json"), stem.with_suffix(".f32")


def write_raster(path, values: np.ndarray, kind: str, channel_names=None, **meta) -> tuple[Path, Path]:
    """Write a (rows, cols) or (rows, cols, channels) array as planar float32."""
    v = np.asarray(values, dtype=np.float32)
    if v.ndim == 2:
        v = v[..., None]
    rows, cols, ch = v.shape
    names = list(channel_names) if channel_names is not None else [f"c{i}" for i in range(ch)]
    header_path, data_path = raster_paths(path)
    planar = np.ascontiguousarray(np.moveaxis(v, 2, 0)).astype(RASTER_DTYPE)
    atomic_write_bytes(data_path, planar.tobytes())
    header = {"kind": kind, "data_file": data_path.name, "dtype": "float32", "byte_order": "little",
              "layout": "planar", "rows": rows, "cols": cols, "channels": ch,
              "channel_names": names, **meta}
    write_json(header_path, header)
    return header_path, data_path


def read_raster(path) -> tuple[np.ndarray, dict]:
    """Return ``(values[rows, cols, channels], header)``."""
    header_path, _ = raster_paths(path)
    header = read_json(header_path)
    try:
        rows, cols, ch = int(header["rows"]), int(header["cols"]), int(header["channels"])
        data_path = header_path.parent / header["data_file"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{header_path}: malformed raster header: {exc}") from None
    try:
        raw = np.fromfile(data_path, dtype=RASTER_DTYPE)
    except OSError as exc:
        raise ParseError(str(exc)) from None
    if raw.size != rows * cols * ch:
        raise ParseError(f"{data_path}: expected {rows * cols * ch} floats, found {raw.size}")
    values = np.moveaxis(raw.reshape(ch, rows, cols), 0, 2).astype(np.float32)
    return values, header


# --- 8-bit images -----------------------------------------------------------

def write_pgm(path, values: np.ndarray) -> None:
    """8-bit binary PGM; floats are rounded half away from zero."""
    v = np.asarray(values)
    u8 = v if v.dtype == np.uint8 else quantize_u8(v)
    rows, cols = u8.shape
    atomic_write_bytes(path, f"P5\n{cols} {rows}\n255\n".encode() + u8.tobytes())


def preview_pgm(path, values: np.ndarray) -> None:
    """Min-max stretched grayscale preview of an arbitrary-valued field."""
    v = np.asarray(values, dtype=np.float64)
    lo, hi = float(v.min()), float(v.max())
    scaled = np.zeros_like(v) if hi == lo else 255.0 * (v - lo) / (hi - lo)
    write_pgm(path, scaled)


def read_gray(path) -> np.ndarray:
    try:
        with Image.open(path) as im:
            if im.mode not in ("L", "1", "P", "I", "I;16"):
                raise ParseError(f"{path}: expected a grayscale image, got mode {im.mode}")
            return np.asarray(im.convert("L"))
    except (OSError, Image.UnidentifiedImageError) as exc:
        raise ParseError(f"{path}: {exc}") from None


def read_rgb(path) -> np.ndarray:
    try:
        with Image.open(path) as im:
            return np.asarray(im.convert("RGB"), dtype=np.float32)
    except (OSError, Image.UnidentifiedImageError) as exc:
        raise ParseError(f"{path}: {exc}") from None


def read_mask(path) -> BinaryMask:
    g = read_gray(path)
    bad = (g != 0) & (g != 255)
    if bad.any():
        raise ParseError(f"{path}: mask pixels must be 0 or 255; found {np.unique(g[bad])[:5]}")
    return BinaryMask(g == 255)


def write_mask(path, mask) -> None:
    bits = mask.bits if isinstance(mask, BinaryMask) else np.asarray(mask, dtype=bool)
    u8 = np.where(bits, 255, 0).astype(np.uint8)
    buf = io.BytesIO()
    fmt = "PNG" if Path(path).suffix.lower() == ".png" else "PPM"
    Image.fromarray(u8, mode="L").save(buf, format=fmt)
    atomic_write_bytes(path, buf.getvalue())


# --- cohort tables ----------------------------------------------------------

def read_densities_csv(path) -> list:
    """Rows of ``patient,group,tls_count,area_mm2`` as PatientDensity records."""
    from .stats import Group, PatientDensity

    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(str(exc)) from None
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    reader = csv.DictReader(lines)
    fields = {f.strip() for f in (reader.fieldnames or [])}
    required = {"patient", "group", "tls_count", "area_mm2"}
    if not required <= fields:
        raise ParseError(f"{path}: missing columns {sorted(required - fields)}")
    out = []
    for lineno, row in enumerate(reader, start=2):
        row = {k.strip(): (v or "").strip() for k, v in row.items() if k}
        try:
            count = float(row["tls_count"])
            if count != int(count):
                raise ValueError("tls_count must be an integer")
            area = float(row["area_mm2"])
            if not area > 0:
                raise ValueError("area_mm2 must be positive")
            out.append(PatientDensity(row["patient"], int(count), area, Group.parse(row["group"])))
        except (TypeError, ValueError) as exc:
            raise ParseError(f"{path}: data line {lineno}: {exc}") from None
    return out
