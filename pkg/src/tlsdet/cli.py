"""``tlsdet`` command line.

Exit status: 0 on success, 2 for invalid input or a violated contract, 1 for
anything unexpected. Set ``TLSDET_NUM_THREADS`` to cap worker threads.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import io as tio
from .core import AttentionMap, DensityMap, GridSpec, Label, MultiChannelImage
from .density import assemble_input, count_nuclei, lda, mean_pool, normalize_density
from .errors import ContractError, DimMismatch, ParseError
from .losses import total_loss
from .metrics import DetectionCounts, MatchCriterion, evaluate, safe_metrics
from .sdt import sdf
from .stats import group_compare
from .synth import SceneParams, generate_scene

EXIT_OK, EXIT_INTERNAL, EXIT_CONTRACT = 0, 1, 2


def _configure_threads():
    n = os.environ.get("TLSDET_NUM_THREADS")
    if n:
        import numba

        numba.set_num_threads(max(1, min(int(n), numba.config.NUMBA_NUM_THREADS)))


def _stem_outputs(out: str) -> tuple[Path, Path, Path]:
    """``foo.pgm`` -> (foo.pgm, foo.json, foo.f32)."""
    p = Path(out)
    stem = p.with_suffix("") if p.suffix else p
    return stem.with_suffix(".pgm"), stem.with_suffix(".json"), stem.with_suffix(".f32")


def _grid_spec(args) -> GridSpec:
    if args.size_px:
        return GridSpec(args.size_px[0], args.size_px[1], args.pitch_um, args.patch_size)
    if args.extent:
        return GridSpec.from_extent(args.extent[0], args.extent[1], args.pitch_um, args.patch_size)
    raise ContractError("give the slide size with --extent W_UM H_UM or --size-px W H")


def _load_map(path, kind_cls):
    values, header = tio.read_raster(path)
    if values.shape[2] != 1:
        raise DimMismatch(f"{path}: expected a single-channel raster")
    spec = GridSpec.from_dict(header["grid"]) if "grid" in header else None
    v = values[:, :, 0]
    if kind_cls is DensityMap:
        if spec is None:
            raise ParseError(f"{path}: density raster lacks a grid spec")
        return DensityMap(v, spec, int(header.get("n_min", 0)), int(header.get("n_max", 0)))
    return AttentionMap(v, spec)


def _load_image(path) -> MultiChannelImage:
    p = Path(path)
    if p.suffix in (".json", ".f32"):
        values, header = tio.read_raster(p)
        return MultiChannelImage(values, header.get("channel_names"))
    return MultiChannelImage(tio.read_rgb(p), ("R", "G", "B"))


# --- commands ---------------------------------------------------------------

def cmd_density(args) -> int:
    spec = _grid_spec(args)
    table = tio.read_nuclei_csv(args.nuclei)
    labels = {Label.parse(t) for t in args.labels.split(",")}
    counts = count_nuclei(table, spec, labels)
    dmap = normalize_density(counts)
    pgm, header, _ = _stem_outputs(args.output)
    tio.write_pgm(pgm, dmap.values)
    tio.write_raster(header, dmap.values, "density", ["density"], grid=spec.to_dict(),
                     n_min=dmap.n_min, n_max=dmap.n_max,
                     value_min=float(dmap.values.min()), value_max=float(dmap.values.max()),
                     labels=sorted(lab.token for lab in labels))
    return EXIT_OK


def cmd_lda(args) -> int:
    att = lda(_load_map(args.density, DensityMap))
    pgm, header, _ = _stem_outputs(args.output)
    meta = {"grid": att.spec.to_dict()} if att.spec else {}
    tio.write_pgm(pgm, att.values)
    tio.write_raster(header, att.values, "attention", ["LDA"], **meta)
    return EXIT_OK


def cmd_pool(args) -> int:
    pooled = mean_pool(_load_image(args.image), args.patch_size)
    tio.write_raster(args.output, pooled.values, "pooled", pooled.channel_names,
                     patch_size_px=args.patch_size)
    return EXIT_OK


def cmd_assemble(args) -> int:
    pooled = _load_image(args.pooled)
    att = _load_map(args.lda, AttentionMap)
    stacked = assemble_input(pooled, att)
    tio.write_raster(args.output, stacked.values, "input", stacked.channel_names)
    return EXIT_OK


def cmd_sdf(args) -> int:
    field = sdf(tio.read_mask(args.mask))
    tio.write_raster(args.output, field.values, "sdf", ["sdf"], units="pixels")
    if args.preview:
        tio.preview_pgm(args.preview, field.values)
    return EXIT_OK


def cmd_loss(args) -> int:
    pred, gt = tio.read_mask(args.pred), tio.read_mask(args.gt)
    if pred.shape != gt.shape:
        raise DimMismatch(f"prediction {pred.shape} and ground truth {gt.shape} differ")
    probs = logits = None
    if args.probs:
        values, _ = tio.read_raster(args.probs)
        if values.shape != pred.shape + (1,):
            raise DimMismatch(f"{args.probs}: probability raster {values.shape[:2]} vs mask {pred.shape}")
        probs = values[:, :, 0].astype(np.float64)
    if args.logits:
        values, _ = tio.read_raster(args.logits)
        if values.shape != pred.shape + (2,):
            raise DimMismatch(f"{args.logits}: need a 2-channel (bg, fg) raster matching the mask")
        logits = values.astype(np.float64)
    terms = total_loss(pred, gt, probs=probs, logits=logits)
    tio.write_json(args.output, terms.to_dict())
    return EXIT_OK


def _parse_betas(text: str) -> list[float]:
    try:
        betas = [float(b) for b in text.split(",") if b.strip()]
    except ValueError:
        raise ContractError(f"bad --beta list {text!r}") from None
    if not betas or any(b <= 0 for b in betas):
        raise ContractError("beta values must be positive")
    return betas


def _counts_from_json(path) -> DetectionCounts:
    doc = tio.read_json(path)
    c = doc.get("counts", doc)
    try:
        counts = DetectionCounts(int(c["TP"]), int(c["FP"]), int(c["FN"]), int(c["TPS"]),
                                 int(c["TPB"]), int(c["n_components"]), int(c["n_boxes"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{path}: malformed counts: {exc}") from None
    return counts


def cmd_eval(args) -> int:
    betas = _parse_betas(args.beta)
    try:
        criterion = MatchCriterion.parse(args.criterion)
    except ValueError as exc:
        raise ContractError(str(exc)) from None
    if args.counts:
        counts = _counts_from_json(args.counts)
        report = {"criterion": "injected", "counts": counts.to_dict(),
                  "metrics": {k: ("undefined" if v is None else v)
                              for k, v in safe_metrics(counts, betas).items()}}
    else:
        if not (args.pred and args.boxes):
            raise ContractError("eval needs PRED_MASK and BOXES, or --counts")
        mask = tio.read_mask(args.pred)
        boxes = tio.read_boxes(args.boxes)
        h, w = mask.shape
        for b in boxes:
            if b.x_min < 0 or b.y_min < 0 or b.x_max >= w or b.y_max >= h:
                raise ContractError(f"box {b.to_dict()} outside the {w}x{h} mask")
        report = evaluate(mask, boxes, criterion, betas, args.connectivity).to_dict()
    tio.write_json(args.output, report)
    return EXIT_OK


def cmd_stats(args) -> int:
    patients = tio.read_densities_csv(args.densities)
    result = group_compare(patients)
    doc = result.to_dict()
    doc["patients"] = [{"patient": p.patient, "group": p.group.value, "tls_count": p.tls_count,
                        "area_mm2": p.area_mm2, "density": p.density} for p in patients]
    tio.write_json(args.output, doc)
    return EXIT_OK


_SYNTH_FLAGS = ("n_clusters", "cluster_radius_um", "nuclei_per_cluster", "background_rate",
                "non_lymphocyte_fraction", "seed", "pitch_um", "patch_size_px")


def cmd_synth(args) -> int:
    params = {}
    if args.params:
        try:
            params = json.loads(Path(args.params).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ParseError(f"{args.params}: {exc}") from None
        params.pop("schema_version", None)
    for name in _SYNTH_FLAGS:
        value = getattr(args, name)
        if value is not None:
            params[name] = value
    if args.extent is not None:
        params["extent_um"] = list(args.extent)
    try:
        sp = SceneParams.from_dict(params)
    except TypeError as exc:
        raise ParseError(f"bad scene parameters: {exc}") from None
    scene = generate_scene(sp)
    echo = json.dumps(sp.to_dict(), sort_keys=True)
    tio.write_nuclei_csv(args.nuclei_out, scene.nuclei, comment=f"tlsdet synth params {echo}")
    tio.write_boxes(args.boxes_out, scene.boxes, params=sp.to_dict(),
                    grid=sp.grid_spec.to_dict(), box_units="slide pixels")
    return EXIT_OK


# --- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tlsdet", description="TLS detection toolkit: density maps, distance fields, losses, metrics and statistics.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("density", help="nuclei CSV -> normalized lymphocyte density map")
    p.add_argument("nuclei")
    p.add_argument("--patch-size", type=int, default=32)
    p.add_argument("--pitch-um", type=float, required=True, help="micrometers per slide pixel")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--extent", type=float, nargs=2, metavar=("W_UM", "H_UM"))
    g.add_argument("--size-px", type=int, nargs=2, metavar=("W", "H"))
    p.add_argument("--labels", default="Lymphocyte", help="comma-separated classes to count")
    p.add_argument("-o", "--output", required=True, help="output .pgm (a .json/.f32 pair is written alongside)")
    p.set_defaults(func=cmd_density)

    p = sub.add_parser("lda", help="density raster -> attention map (255 - D)")
    p.add_argument("density")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_lda)

    p = sub.add_parser("pool", help="RGB image or raster -> d x d mean-pooled raster")
    p.add_argument("image")
    p.add_argument("--patch-size", type=int, default=32)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_pool)

    p = sub.add_parser("assemble", help="pooled RGB + attention -> 4-channel input raster")
    p.add_argument("pooled")
    p.add_argument("lda")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_assemble)

    p = sub.add_parser("sdf", help="binary mask -> signed distance raster")
    p.add_argument("mask")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--preview", help="optional grayscale PGM preview")
    p.set_defaults(func=cmd_sdf)

    p = sub.add_parser("loss", help="prediction vs ground-truth masks -> loss terms")
    p.add_argument("pred")
    p.add_argument("gt")
    p.add_argument("--probs", help="single-channel foreground probability raster")
    p.add_argument("--logits", help="two-channel (bg, fg) logit raster")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_loss)

    p = sub.add_parser("eval", help="prediction mask + boxes -> detection report")
    p.add_argument("pred", nargs="?")
    p.add_argument("boxes", nargs="?")
    p.add_argument("--criterion", default="any", help="any | iou:T | cover:T")
    p.add_argument("--beta", default="1,2")
    p.add_argument("--connectivity", type=int, choices=(4, 8), default=8)
    p.add_argument("--counts", help="score precomputed counts JSON instead of a mask")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("stats", help="per-patient TLS counts -> group comparison")
    p.add_argument("densities")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("synth", help="generate a synthetic clustered-lymphocyte scene")
    p.add_argument("--params", help="JSON file of scene parameters; flags override it")
    p.add_argument("--extent", type=float, nargs=2, metavar=("W_UM", "H_UM"))
    p.add_argument("--n-clusters", dest="n_clusters", type=int)
    p.add_argument("--cluster-radius-um", dest="cluster_radius_um", type=float)
    p.add_argument("--nuclei-per-cluster", dest="nuclei_per_cluster", type=float)
    p.add_argument("--background-rate", dest="background_rate", type=float, help="nuclei per mm^2")
    p.add_argument("--non-lymphocyte-fraction", dest="non_lymphocyte_fraction", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--pitch-um", dest="pitch_um", type=float)
    p.add_argument("--patch-size", dest="patch_size_px", type=int)
    p.add_argument("--nuclei-out", required=True)
    p.add_argument("--boxes-out", required=True)
    p.set_defaults(func=cmd_synth)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _configure_threads()
        return args.func(args)
    except (ContractError, ValueError) as exc:
        print(f"tlsdet {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONTRACT
    except Exception as exc:  # noqa: BLE001
        print(f"tlsdet {args.command}: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
