"""Operator command line: detect lines, evaluate against annotations, audit
FOV, generate synthetic datasets, and benchmark the voting kernels.

Exit codes: 0 success, 1 configuration/validation error, 2 data error,
3 internal failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import io as fio
from .extraction import ClassPredictionSet, SemanticClass
from .fovclass import FovLabel, fov_accuracy, predict_fov
from .geometry import (HoughGridSpec, ImageGeometry, ParametricLine, Segment,
                       clip_to_image, line_intersection, line_through_points)
from .hough import benchmark_kernels
from .metrics import evaluate
from .pipeline import (detect_activations, detect_channels, detect_image)
from .synth import (SceneSpec, SweepRanges, _clip_segment_to_rect, _stroke,
                    generate_sweep, render_class_channels)

IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp"}

OVERLAY_COLORS = {
    SemanticClass.AISLE_LEFT: (229, 57, 53),
    SemanticClass.AISLE_RIGHT: (255, 179, 0),
    SemanticClass.RACK_TOP_LEFT: (67, 160, 71),
    SemanticClass.RACK_TOP_RIGHT: (30, 136, 229),
    SemanticClass.WALL_END_CAP: (171, 71, 188),
}


class ConfigError(Exception):
    """Bad flags or config file; maps to exit code 1."""


@dataclass(frozen=True)
class RunConfig:
    """Defaults for the detection pipeline; flags override the config file,
    which overrides these built-ins."""

    n_theta: int = 150
    n_r: int = 150
    threshold: float = 0.01
    ea_taus: tuple[float, ...] = (0.0, 0.95)
    rescale: int = 1200
    kernel: str = "optimized"
    seed: int = 0

    @property
    def grid(self) -> HoughGridSpec:
        return HoughGridSpec(self.n_theta, self.n_r)


def _parse_grid(text: str) -> tuple[int, int]:
    try:
        a, b = text.lower().split("x")
        return int(a), int(b)
    except ValueError as exc:
        raise ConfigError(f"--grid expects THETAxR, e.g. 150x150, got {text!r}") from exc


def _parse_floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}") from exc


def _parse_range(text: str) -> tuple[float, float]:
    values = _parse_floats(text)
    if len(values) != 2 or values[0] > values[1]:
        raise ConfigError(f"expected LO,HI with LO <= HI, got {text!r}")
    return values[0], values[1]


def load_run_config(config_path: str | None, args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    if config_path:
        try:
            raw = json.loads(Path(config_path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config file {config_path}: {exc}") from exc
        known = {"n_theta", "n_r", "threshold", "ea_taus", "rescale", "kernel", "seed"}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "ea_taus" in raw:
            raw["ea_taus"] = tuple(float(v) for v in raw["ea_taus"])
        try:
            cfg = replace(cfg, **raw)
        except TypeError as exc:
            raise ConfigError(f"bad config file {config_path}: {exc}") from exc
    # explicit flags win over the file
    if getattr(args, "grid", None) is not None:
        n_theta, n_r = _parse_grid(args.grid)
        cfg = replace(cfg, n_theta=n_theta, n_r=n_r)
    if getattr(args, "threshold", None) is not None:
        cfg = replace(cfg, threshold=args.threshold)
    if getattr(args, "taus", None) is not None:
        cfg = replace(cfg, ea_taus=_parse_floats(args.taus))
    if getattr(args, "rescale", None) is not None:
        cfg = replace(cfg, rescale=args.rescale)
    if getattr(args, "kernel", None) is not None:
        cfg = replace(cfg, kernel=args.kernel)
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, seed=args.seed)
    _validate_run_config(cfg)
    return cfg


def _validate_run_config(cfg: RunConfig) -> None:
    if cfg.n_theta < 2 or cfg.n_r < 2:
        raise ConfigError(f"grid must be at least 2x2, got {cfg.n_theta}x{cfg.n_r}")
    if not (0.0 < cfg.threshold < 1.0):
        raise ConfigError(f"threshold must lie in (0, 1), got {cfg.threshold}")
    if any(not 0.0 <= t <= 1.0 for t in cfg.ea_taus):
        raise ConfigError(f"EA taus must lie in [0, 1], got {cfg.ea_taus}")
    if cfg.rescale < 16:
        raise ConfigError(f"rescale target must be at least 16, got {cfg.rescale}")
    if cfg.kernel not in ("reference", "optimized"):
        raise ConfigError(f"kernel must be reference or optimized, got {cfg.kernel!r}")


# ---------------------------------------------------------------------------
# detect

def _trim_wall_end_cap(preds: ClassPredictionSet, geom: ImageGeometry) -> Segment | None:
    """Display convention: the end-cap line is drawn only between its
    intersections with the two aisle lines when both are present."""
    wec = preds[SemanticClass.WALL_END_CAP].line
    full = clip_to_image(wec, geom)
    if full is None:
        return None
    left = preds.get(SemanticClass.AISLE_LEFT)
    right = preds.get(SemanticClass.AISLE_RIGHT)
    if left is None or right is None:
        return full
    p_left = line_intersection(wec, left.line, geom)
    p_right = line_intersection(wec, right.line, geom)
    if p_left is None or p_right is None:
        return full
    trimmed = _clip_segment_to_rect(p_left, p_right, geom.width, geom.height)
    return trimmed if trimmed is not None and trimmed.length > 1.0 else full


def _render_overlay(rgb: np.ndarray, preds: ClassPredictionSet) -> np.ndarray:
    geom = ImageGeometry(rgb.shape[1], rgb.shape[0])
    out = rgb.astype(np.float64)
    for cls, pred in sorted(preds.items(), key=lambda kv: kv[0].value):
        if cls is SemanticClass.WALL_END_CAP:
            seg = _trim_wall_end_cap(preds, geom)
        else:
            seg = clip_to_image(pred.line, geom)
        if seg is None:
            continue
        mask = np.zeros(rgb.shape[:2])
        _stroke(mask, seg, 1.0)
        color = np.array(OVERLAY_COLORS[cls], dtype=np.float64)
        out = out * (1.0 - mask[:, :, None]) + color[None, None, :] * mask[:, :, None]
    return np.clip(np.round(out), 0, 255).astype(np.uint8)


def _detect_one(path: Path, cfg: RunConfig) -> tuple[fio.PredictionRecord, np.ndarray | None]:
    """Run detection on one input file; returns the record plus the backdrop
    image for overlays (None when the input carries no image)."""
    suffix = path.suffix.lower()
    if suffix in IMAGE_SUFFIXES:
        rgb = fio.read_image(path)
        if rgb.shape[:2] != (cfg.rescale, cfg.rescale):
            rgb = fio.resize_rgb(rgb, cfg.rescale, cfg.rescale)
        preds = detect_image(rgb, cfg.grid, cfg.threshold, cfg.kernel)
        geom = ImageGeometry(rgb.shape[1], rgb.shape[0])
        backdrop = rgb
    elif suffix == fio.FLOAT_GRID_SUFFIX:
        loaded = fio.read_float_grid(path)
        if isinstance(loaded, dict):
            shape = next(iter(loaded.values())).shape
            if shape == cfg.grid.shape:
                # already Hough activations; interpret against the configured
                # image size
                geom = ImageGeometry(cfg.rescale, cfg.rescale)
                preds = detect_activations(loaded, geom, cfg.threshold)
                backdrop = None
            else:
                geom = ImageGeometry(shape[1], shape[0])
                preds = detect_channels(loaded, cfg.grid, cfg.threshold, cfg.kernel)
                stacked = np.max(np.stack(list(loaded.values())), axis=0)
                backdrop = fio.intensity_to_rgb(np.clip(stacked, 0.0, 1.0))
        else:
            from .frontend import build_pyramid
            from .hough import aggregate_pyramid
            from .extraction import select_per_class
            geom = ImageGeometry(loaded.shape[1], loaded.shape[0])
            multi = aggregate_pyramid(build_pyramid(loaded), cfg.grid, geom,
                                      kernel=cfg.kernel)
            acts = {cls: multi.aggregated for cls in SemanticClass}
            preds = select_per_class(acts, cfg.threshold, cfg.grid, geom)
            backdrop = fio.intensity_to_rgb(np.clip(loaded, 0.0, 1.0))
    else:
        raise fio.FormatError(f"{path}: unsupported input type {suffix!r}")
    record = fio.PredictionRecord(path.stem, geom.width, geom.height, preds)
    return record, backdrop


def cmd_detect(args: argparse.Namespace) -> int:
    cfg = load_run_config(args.config, args)
    inputs = [Path(p) for p in args.inputs]
    missing = [str(p) for p in inputs if not p.is_file()]
    if missing:
        raise ConfigError(f"input files not found: {missing}")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    records = []
    failures = []
    for path in inputs:
        try:
            record, backdrop = _detect_one(path, cfg)
        except fio.FormatError as exc:
            print(f"error: {exc}", file=sys.stderr)
            failures.append(str(path))
            continue
        records.append(record)
        if args.overlay:
            if backdrop is None:
                print(f"note: {path}: no source image to overlay", file=sys.stderr)
            else:
                fio.write_image(out_dir / f"{path.stem}_overlay.png",
                                _render_overlay(backdrop, record.predictions))
    fio.write_predictions(out_dir / "predictions.jsonl", records)
    print(f"wrote {len(records)} prediction(s) to {out_dir / 'predictions.jsonl'}")
    if failures:
        print(f"{len(failures)} input(s) failed", file=sys.stderr)
        return 2
    return 0


# ---------------------------------------------------------------------------
# eval

def _truth_sets(annotations: Sequence[fio.AnnotationRecord], geom: ImageGeometry
                ) -> dict[str, dict[SemanticClass, ParametricLine]]:
    out = {}
    for rec in annotations:
        lines = {}
        for cls, (p0, p1) in rec.lines.items():
            line = line_through_points(p0, p1, geom)
            if line is None:
                raise fio.FormatError(f"annotation {rec.image_id}: {cls.value}: "
                                      f"endpoints coincide")
            lines[cls] = line
        out[rec.image_id] = lines
    return out


def _common_geometry(sizes: set[tuple[int, int]]) -> ImageGeometry:
    if len(sizes) != 1:
        raise fio.FormatError(f"records disagree on image size: {sorted(sizes)}")
    w, h = sizes.pop()
    return ImageGeometry(w, h)


def cmd_eval(args: argparse.Namespace) -> int:
    cfg = load_run_config(args.config, args)
    predictions = fio.read_predictions(Path(args.predictions))
    annotations = fio.read_annotations(Path(args.annotations))
    pred_ids = {r.image_id for r in predictions}
    truth_ids = {r.image_id for r in annotations}
    if pred_ids != truth_ids:
        only_pred = sorted(pred_ids - truth_ids)
        only_truth = sorted(truth_ids - pred_ids)
        raise fio.FormatError(f"prediction/annotation ids differ; "
                              f"only in predictions: {only_pred[:10]}, "
                              f"only in annotations: {only_truth[:10]}")
    sizes = {(r.width, r.height) for r in predictions} | {(r.width, r.height) for r in annotations}
    geom = _common_geometry(sizes)
    truths = _truth_sets(annotations, geom)
    preds_by_id = {r.image_id: r.predictions for r in predictions}
    dataset = [(preds_by_id[i], truths[i]) for i in sorted(pred_ids)]
    report = evaluate(dataset, geom, cfg.ea_taus)
    prefix = Path(args.out_prefix)
    fio.write_report(report, prefix.with_suffix(".json"), prefix.with_suffix(".txt"))
    print(fio.format_report_table(report))
    print(f"report written to {prefix.with_suffix('.json')} and {prefix.with_suffix('.txt')}")
    return 0


# ---------------------------------------------------------------------------
# fov

def cmd_fov(args: argparse.Namespace) -> int:
    load_run_config(args.config, args)
    predictions = fio.read_predictions(Path(args.predictions))
    labels = {rec.image_id: predict_fov(rec.predictions) for rec in predictions}
    if args.out:
        fio.write_fov_labels(Path(args.out), labels)
        print(f"wrote {len(labels)} label(s) to {args.out}")
    else:
        for image_id, label in labels.items():
            print(json.dumps({"image_id": image_id, "fov": label.value}, sort_keys=True))
    if args.truth:
        truth = fio.read_fov_labels(Path(args.truth))
        missing = sorted(set(labels) - set(truth))
        if missing:
            raise fio.FormatError(f"no truth label for ids: {missing[:10]}")
        pairs = [(labels[i], truth[i]) for i in sorted(labels)]
        accuracy = fov_accuracy(pairs)
        base = sum(1 for i in sorted(labels) if truth[i] is FovLabel.GOOD) / len(pairs)
        print(f"accuracy       {accuracy:.3f}  ({len(pairs)} images)")
        print(f"good base rate {base:.3f}")
    return 0


# ---------------------------------------------------------------------------
# synth

def _scene_json(spec: SceneSpec, image_id: str) -> dict:
    return {
        "image_id": image_id,
        "aisle_width": spec.aisle_width,
        "shelf_height": spec.shelf_height,
        "aisle_length": spec.aisle_length,
        "camera": list(spec.camera),
        "yaw": spec.yaw,
        "pitch": spec.pitch,
        "focal_length": spec.focal_length,
        "image_size": spec.image_size,
        "clutter_lines": spec.clutter_lines,
        "noise_sigma": spec.noise_sigma,
        "rng_seed": spec.rng_seed,
    }


def cmd_synth(args: argparse.Namespace) -> int:
    load_run_config(args.config, args)
    if args.count <= 0:
        raise ConfigError(f"--count must be positive, got {args.count}")
    if args.image_size < 16:
        raise ConfigError(f"--image-size must be at least 16, got {args.image_size}")
    if args.clutter < 0 or args.noise < 0:
        raise ConfigError("--clutter and --noise must be non-negative")
    try:
        ranges = SweepRanges(
            cam_x=_parse_range(args.x_range),
            cam_y=_parse_range(args.y_range),
            cam_z=_parse_range(args.z_range),
            yaw=_parse_range(args.yaw_range),
            pitch=_parse_range(args.pitch_range),
        )
        template = SceneSpec(
            aisle_width=args.aisle_width,
            shelf_height=args.shelf_height,
            aisle_length=args.aisle_length,
            focal_length=args.focal if args.focal else 0.75 * args.image_size,
            image_size=args.image_size,
            clutter_lines=args.clutter,
            noise_sigma=args.noise,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    out_dir = Path(args.out)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    if not args.no_channels:
        (out_dir / "channels").mkdir(parents=True, exist_ok=True)
    digits = max(4, len(str(args.count - 1)))
    scene_rows = []
    annotation_rows = []
    fov_rows: dict[str, FovLabel] = {}
    for index, item in enumerate(generate_sweep(args.count, ranges, args.seed, template)):
        image_id = f"scene_{index:0{digits}d}"
        fio.write_image(out_dir / "images" / f"{image_id}.png",
                        fio.intensity_to_rgb(np.clip(item.image, 0.0, 1.0)))
        if not args.no_channels:
            channels = render_class_channels(item.spec)
            fio.write_class_grid(out_dir / "channels" / f"{image_id}{fio.FLOAT_GRID_SUFFIX}",
                                 channels)
        annotation_rows.append(fio.AnnotationRecord(
            image_id, item.spec.image_size, item.spec.image_size,
            {cls: (gt.extent.p0, gt.extent.p1) for cls, gt in item.lines.items()},
        ))
        fov_rows[image_id] = item.fov
        scene_rows.append(_scene_json(item.spec, image_id))
    fio.write_annotations(out_dir / "annotations.jsonl", annotation_rows)
    fio.write_fov_labels(out_dir / "fov_labels.jsonl", fov_rows)
    fio._write_jsonl(out_dir / "scenes.jsonl", scene_rows)
    good = sum(1 for label in fov_rows.values() if label is FovLabel.GOOD)
    print(f"wrote {args.count} scene(s) to {out_dir} "
          f"(good FOV: {good}, bad: {args.count - good})")
    return 0


# ---------------------------------------------------------------------------
# bench

def cmd_bench(args: argparse.Namespace) -> int:
    cfg = load_run_config(args.config, args)
    sizes = []
    for token in args.sizes.split(","):
        try:
            size = int(token)
        except ValueError as exc:
            raise ConfigError(f"--sizes expects integers, got {token!r}") from exc
        if size <= 0:
            raise ConfigError(f"bench sizes must be positive, got {size}")
        sizes.append(size)
    if args.repeats < 5:
        raise ConfigError(f"--repeats must be at least 5, got {args.repeats}")
    records = benchmark_kernels(sizes, cfg.grid, repeats=args.repeats, seed=cfg.seed)
    rows = []
    for rec in records:
        status = "ok" if rec.equivalent else "MISMATCH"
        print(f"{rec.width}x{rec.height} grid {rec.spec.n_theta}x{rec.spec.n_r}  "
              f"reference {rec.reference_s * 1e3:8.1f} ms  "
              f"optimized {rec.optimized_s * 1e3:8.1f} ms  "
              f"speedup {rec.speedup:5.2f}x  equivalence {status} "
              f"(max rel err {rec.max_rel_err:.2e})")
        rows.append({
            "width": rec.width, "height": rec.height,
            "n_theta": rec.spec.n_theta, "n_r": rec.spec.n_r,
            "reference_s": rec.reference_s, "optimized_s": rec.optimized_s,
            "speedup": rec.speedup, "max_rel_err": rec.max_rel_err,
            "equivalent": rec.equivalent,
        })
    if args.out:
        fio._atomic_write_text(Path(args.out), json.dumps(rows, indent=2) + "\n")
    if not all(rec.equivalent for rec in records):
        print("kernel equivalence check failed", file=sys.stderr)
        return 3
    return 0


# ---------------------------------------------------------------------------
# argument parsing

def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file; flags override it")
    parser.add_argument("--grid", help="accumulator resolution THETAxR (default 150x150)")
    parser.add_argument("--threshold", type=float,
                        help="per-class confidence threshold (default 0.01)")
    parser.add_argument("--taus", help="EA thresholds for dataset F1 (default 0,0.95)")
    parser.add_argument("--rescale", type=int,
                        help="square side images are rescaled to (default 1200)")
    parser.add_argument("--kernel", choices=("reference", "optimized"),
                        help="voting kernel (default optimized)")
    parser.add_argument("--seed", type=int, help="RNG seed (default 0)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="semline",
        description="Semantic line detection with Hough voting and FOV auditing")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("detect", help="detect per-class lines in images or float grids")
    _add_common(p)
    p.add_argument("inputs", nargs="+", help="image or .hslf float-grid files")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--overlay", action="store_true",
                   help="write color-coded overlay images")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("eval", help="score predictions against annotations")
    _add_common(p)
    p.add_argument("--predictions", required=True)
    p.add_argument("--annotations", required=True)
    p.add_argument("--out-prefix", default="report",
                   help="report files <prefix>.json and <prefix>.txt")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("fov", help="classify field-of-view quality from predictions")
    _add_common(p)
    p.add_argument("--predictions", required=True)
    p.add_argument("--truth", help="ground-truth FOV labels for accuracy reporting")
    p.add_argument("--out", help="write labels to this JSONL file instead of stdout")
    p.set_defaults(func=cmd_fov)

    p = sub.add_parser("synth", help="generate a synthetic store-aisle dataset")
    _add_common(p)
    p.add_argument("--out", required=True, help="dataset directory")
    p.add_argument("--count", type=int, required=True, help="number of scenes")
    p.add_argument("--image-size", type=int, default=600)
    p.add_argument("--clutter", type=int, default=0, help="clutter segments per scene")
    p.add_argument("--noise", type=float, default=0.0, help="additive noise sigma")
    p.add_argument("--aisle-width", type=float, default=1.8)
    p.add_argument("--shelf-height", type=float, default=2.0)
    p.add_argument("--aisle-length", type=float, default=12.0)
    p.add_argument("--focal", type=float, default=0.0,
                   help="focal length in pixels (default 0.75 * image size)")
    p.add_argument("--x-range", default="-0.63,0.63", help="camera x interval, meters")
    p.add_argument("--y-range", default="1.2,2.0", help="camera height interval, meters")
    p.add_argument("--z-range", default="-0.5,3.0", help="camera depth interval, meters")
    p.add_argument("--yaw-range", default="-0.20,0.20", help="yaw interval, radians")
    p.add_argument("--pitch-range", default="-0.85,0.10", help="pitch interval, radians")
    p.add_argument("--no-channels", action="store_true",
                   help="skip per-scene class channel files")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("bench", help="time the voting kernels and check equivalence")
    _add_common(p)
    p.add_argument("--sizes", default="600,1200", help="square map sizes to time")
    p.add_argument("--repeats", type=int, default=5, help="timings per kernel (median)")
    p.add_argument("--out", help="write timing records to this JSON file")
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (fio.FormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover - internal invariant breach
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
