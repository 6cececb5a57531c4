"""File formats: PNG images, the HSLF1 float-grid container, and the
JSON-lines annotation / prediction / FOV-label files, plus the evaluation
report writer.  Readers reject malformed input, naming the offending record
and field; writers are atomic (temp file + rename).

HSLF1 layout (all integers little-endian):

    offset  size  field
    0       5     magic, the ASCII bytes "HSLF1"
    5       1     format version (1)
    6       4     width   (uint32)
    10      4     height  (uint32)
    14      2     channel count (uint16)
    16      ...   per channel: uint16 name length + UTF-8 name
    ...     ...   payload: channels x height x width float32 values,
                  row-major within each channel plane

A five-channel file whose names are exactly the semantic class names loads
as a class-keyed channel set (the seam through which a trained model's
activations can be injected); a single-channel file loads as a plain
intensity map.
"""

from __future__ import annotations

import json
import math
import os
import struct
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from PIL import Image

from .extraction import (CLASS_NAMES, ClassPredictionSet, LinePrediction,
                         SemanticClass)
from .fovclass import FovLabel
from .geometry import ParametricLine
from .metrics import ClassMetrics, EvalReport

FLOAT_GRID_MAGIC = b"HSLF1"
FLOAT_GRID_VERSION = 1
FLOAT_GRID_SUFFIX = ".hslf"

_HEADER = struct.Struct("<5sBIIH")
_NAME_LEN = struct.Struct("<H")
UNDEFINED_MARK = "—"  # report cell for a rate with a zero denominator


class FormatError(ValueError):
    """A file failed validation; the message names the location."""


class AnnotationError(FormatError):
    pass


# ---------------------------------------------------------------------------
# atomic writes

def _atomic_write_bytes(path: Path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _atomic_write_text(path: Path, text: str) -> None:
    _atomic_write_bytes(path, text.encode("utf-8"))


# ---------------------------------------------------------------------------
# images

def read_image(path: Path) -> np.ndarray:
    """Load an image file as an HxWx3 uint8 RGB array."""
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"))


def write_image(path: Path, rgb: np.ndarray) -> None:
    if rgb.dtype != np.uint8 or rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ValueError(f"expected HxWx3 uint8, got {rgb.dtype} {rgb.shape}")
    import io as _io
    buf = _io.BytesIO()
    Image.fromarray(rgb, mode="RGB").save(buf, format="PNG")
    _atomic_write_bytes(Path(path), buf.getvalue())


def intensity_to_rgb(m: np.ndarray) -> np.ndarray:
    """Map a [0, 1] intensity map to an 8-bit grayscale RGB raster."""
    gray = np.clip(np.asarray(m, dtype=np.float64), 0.0, 1.0)
    gray8 = np.round(gray * 255.0).astype(np.uint8)
    return np.repeat(gray8[:, :, None], 3, axis=2)


def resize_rgb(rgb: np.ndarray, width: int, height: int) -> np.ndarray:
    """Bilinear resize of an 8-bit RGB raster."""
    img = Image.fromarray(rgb, mode="RGB").resize((width, height), Image.BILINEAR)
    return np.asarray(img)


# ---------------------------------------------------------------------------
# float grids

def write_float_grid(path: Path, channels: Sequence[tuple[str, np.ndarray]]) -> None:
    """Write named float32 channel planes; all planes must share one shape."""
    if not channels:
        raise ValueError("float grid needs at least one channel")
    shapes = {np.asarray(m).shape for _, m in channels}
    if len(shapes) != 1:
        raise ValueError(f"channel shapes disagree: {sorted(shapes)}")
    height, width = shapes.pop()
    parts = [_HEADER.pack(FLOAT_GRID_MAGIC, FLOAT_GRID_VERSION,
                          width, height, len(channels))]
    for name, _ in channels:
        encoded = name.encode("utf-8")
        parts.append(_NAME_LEN.pack(len(encoded)))
        parts.append(encoded)
    for _, m in channels:
        plane = np.ascontiguousarray(np.asarray(m, dtype="<f4"))
        parts.append(plane.tobytes())
    _atomic_write_bytes(Path(path), b"".join(parts))


def write_class_grid(path: Path, channels: Mapping[SemanticClass, np.ndarray]) -> None:
    """Class-keyed channel set in class definition order."""
    if set(channels) != set(SemanticClass):
        missing = sorted(c.value for c in SemanticClass if c not in channels)
        raise ValueError(f"class channel set incomplete, missing: {missing}")
    write_float_grid(path, [(cls.value, channels[cls]) for cls in SemanticClass])


def read_float_grid(path: Path) -> dict[SemanticClass, np.ndarray] | np.ndarray:
    """Load a float grid: a class-keyed dict when the channels are the five
    class names, a plain 2-D map when single-channel."""
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < _HEADER.size:
        raise FormatError(f"{path}: truncated header ({len(blob)} bytes)")
    magic, version, width, height, n_channels = _HEADER.unpack_from(blob, 0)
    if magic != FLOAT_GRID_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {FLOAT_GRID_MAGIC!r}")
    if version != FLOAT_GRID_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    offset = _HEADER.size
    names = []
    for k in range(n_channels):
        if offset + _NAME_LEN.size > len(blob):
            raise FormatError(f"{path}: truncated channel name table at channel {k}")
        (name_len,) = _NAME_LEN.unpack_from(blob, offset)
        offset += _NAME_LEN.size
        if offset + name_len > len(blob):
            raise FormatError(f"{path}: truncated channel name table at channel {k}")
        names.append(blob[offset:offset + name_len].decode("utf-8"))
        offset += name_len
    expected = n_channels * height * width * 4
    payload = blob[offset:]
    if len(payload) != expected:
        raise FormatError(f"{path}: payload is {len(payload)} bytes, "
                          f"header implies {expected}")
    planes = np.frombuffer(payload, dtype="<f4").reshape(n_channels, height, width)
    if n_channels == 1:
        return planes[0].copy()
    unknown = [n for n in names if n not in CLASS_NAMES]
    if unknown:
        raise FormatError(f"{path}: unknown channel name {unknown[0]!r}")
    if set(names) != set(CLASS_NAMES):
        missing = sorted(set(CLASS_NAMES) - set(names))
        raise FormatError(f"{path}: class channel set incomplete, missing {missing}")
    return {CLASS_NAMES[name]: planes[k].copy() for k, name in enumerate(names)}


# ---------------------------------------------------------------------------
# JSON-lines helpers

def _read_jsonl(path: Path) -> Iterable[tuple[int, dict]]:
    path = Path(path)
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not raw.strip():
            continue
        try:
            record = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: line {lineno}: invalid JSON ({exc.msg})") from exc
        if not isinstance(record, dict):
            raise FormatError(f"{path}: line {lineno}: record must be an object")
        yield lineno, record


def _write_jsonl(path: Path, records: Iterable[dict]) -> None:
    lines = [json.dumps(rec, sort_keys=True) for rec in records]
    _atomic_write_text(Path(path), "\n".join(lines) + ("\n" if lines else ""))


def _field(path: Path, lineno: int, record: dict, name: str, kind) -> object:
    if name not in record:
        raise FormatError(f"{path}: line {lineno}: missing field '{name}'")
    value = record[name]
    if kind is float:
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise FormatError(f"{path}: line {lineno}: field '{name}' must be a number")
        return float(value)
    if not isinstance(value, kind) or isinstance(value, bool):
        raise FormatError(f"{path}: line {lineno}: field '{name}' must be {kind.__name__}")
    return value


# ---------------------------------------------------------------------------
# annotations

@dataclass(frozen=True)
class AnnotationRecord:
    """Hand- or generator-drawn ground truth: per class, a line's two
    endpoints in pixel coordinates."""

    image_id: str
    width: int
    height: int
    lines: dict[SemanticClass, tuple[tuple[float, float], tuple[float, float]]]


def _parse_endpoint(path: Path, lineno: int, cls_name: str, value: object,
                    width: int, height: int) -> tuple[float, float]:
    where = f"{path}: line {lineno}: lines.{cls_name}"
    if (not isinstance(value, (list, tuple)) or len(value) != 2
            or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value)):
        raise AnnotationError(f"{where}: endpoint must be [x, y]")
    x, y = float(value[0]), float(value[1])
    if not (0.0 <= x <= width and 0.0 <= y <= height):
        raise AnnotationError(f"{where}: endpoint ({x}, {y}) outside "
                              f"[0, {width}] x [0, {height}]")
    return x, y


def read_annotations(path: Path) -> list[AnnotationRecord]:
    path = Path(path)
    records = []
    for lineno, record in _read_jsonl(path):
        image_id = _field(path, lineno, record, "image_id", str)
        width = _field(path, lineno, record, "width", int)
        height = _field(path, lineno, record, "height", int)
        if width <= 0 or height <= 0:
            raise AnnotationError(f"{path}: line {lineno}: non-positive image size")
        raw_lines = _field(path, lineno, record, "lines", dict)
        lines = {}
        for cls_name, endpoints in raw_lines.items():
            if cls_name not in CLASS_NAMES:
                raise AnnotationError(f"{path}: line {lineno}: lines.{cls_name}: "
                                      f"unknown class")
            if not isinstance(endpoints, (list, tuple)) or len(endpoints) != 2:
                raise AnnotationError(f"{path}: line {lineno}: lines.{cls_name}: "
                                      f"expected two endpoints")
            p0 = _parse_endpoint(path, lineno, cls_name, endpoints[0], width, height)
            p1 = _parse_endpoint(path, lineno, cls_name, endpoints[1], width, height)
            lines[CLASS_NAMES[cls_name]] = (p0, p1)
        records.append(AnnotationRecord(image_id, width, height, lines))
    return records


def write_annotations(path: Path, records: Sequence[AnnotationRecord]) -> None:
    _write_jsonl(Path(path), (
        {
            "image_id": rec.image_id,
            "width": rec.width,
            "height": rec.height,
            "lines": {cls.value: [list(p0), list(p1)]
                      for cls, (p0, p1) in sorted(rec.lines.items(), key=lambda kv: kv[0].value)},
        }
        for rec in records
    ))


# ---------------------------------------------------------------------------
# predictions

@dataclass(frozen=True)
class PredictionRecord:
    image_id: str
    width: int
    height: int
    predictions: ClassPredictionSet


def read_predictions(path: Path) -> list[PredictionRecord]:
    path = Path(path)
    records = []
    for lineno, record in _read_jsonl(path):
        image_id = _field(path, lineno, record, "image_id", str)
        width = _field(path, lineno, record, "width", int)
        height = _field(path, lineno, record, "height", int)
        raw = _field(path, lineno, record, "predictions", dict)
        preds: ClassPredictionSet = {}
        for cls_name, entry in raw.items():
            if cls_name not in CLASS_NAMES:
                raise FormatError(f"{path}: line {lineno}: predictions.{cls_name}: "
                                  f"unknown class")
            if not isinstance(entry, dict):
                raise FormatError(f"{path}: line {lineno}: predictions.{cls_name}: "
                                  f"must be an object")
            try:
                theta = float(entry["theta"])
                r = float(entry["r"])
                confidence = float(entry["confidence"])
            except (KeyError, TypeError, ValueError) as exc:
                raise FormatError(f"{path}: line {lineno}: predictions.{cls_name}: "
                                  f"needs numeric theta, r, confidence") from exc
            if not (0.0 <= theta < math.pi):
                raise FormatError(f"{path}: line {lineno}: predictions.{cls_name}: "
                                  f"theta {theta} outside [0, pi)")
            preds[CLASS_NAMES[cls_name]] = LinePrediction(
                ParametricLine(theta, r), confidence)
        records.append(PredictionRecord(image_id, width, height, preds))
    return records


def write_predictions(path: Path, records: Sequence[PredictionRecord]) -> None:
    _write_jsonl(Path(path), (
        {
            "image_id": rec.image_id,
            "width": rec.width,
            "height": rec.height,
            "predictions": {
                cls.value: {"theta": pred.line.theta, "r": pred.line.r,
                            "confidence": pred.confidence}
                for cls, pred in sorted(rec.predictions.items(), key=lambda kv: kv[0].value)
            },
        }
        for rec in records
    ))


# ---------------------------------------------------------------------------
# FOV labels

def read_fov_labels(path: Path) -> dict[str, FovLabel]:
    path = Path(path)
    labels = {}
    by_value = {label.value: label for label in FovLabel}
    for lineno, record in _read_jsonl(path):
        image_id = _field(path, lineno, record, "image_id", str)
        raw = _field(path, lineno, record, "fov", str)
        if raw not in by_value:
            raise FormatError(f"{path}: line {lineno}: fov must be one of "
                              f"{sorted(by_value)}, got {raw!r}")
        labels[image_id] = by_value[raw]
    return labels


def write_fov_labels(path: Path, labels: Mapping[str, FovLabel]) -> None:
    _write_jsonl(Path(path), (
        {"image_id": image_id, "fov": label.value}
        for image_id, label in labels.items()
    ))


# ---------------------------------------------------------------------------
# evaluation reports

def _rate(value: float | None) -> float | None:
    return None if value is None else round(value, 6)


def write_report(report: EvalReport, json_path: Path, table_path: Path) -> None:
    """Emit the machine-readable report plus the aligned per-class table."""
    payload = {
        "image_count": report.image_count,
        "classes": {
            cls.value: {
                "tp": m.tp, "fp": m.fp, "fn": m.fn, "tn": m.tn,
                "precision": _rate(m.precision), "recall": _rate(m.recall),
                "accuracy": _rate(m.accuracy), "f1": _rate(m.f1),
            }
            for cls, m in report.per_class.items()
        },
        "mean_ea": _rate(report.mean_ea),
        "median_ea": _rate(report.median_ea),
        "f1_at_tau": {str(tau): _rate(f1) for tau, f1 in report.f1_at_tau.items()},
    }
    _atomic_write_text(Path(json_path), json.dumps(payload, indent=2, sort_keys=True) + "\n")
    _atomic_write_text(Path(table_path), format_report_table(report))


def format_report_table(report: EvalReport) -> str:
    def cell(value: float | None) -> str:
        return UNDEFINED_MARK if value is None else f"{value:.2f}"

    def ea_cell(value: float | None) -> str:
        return UNDEFINED_MARK if value is None else f"{value:.3f}"

    name_width = max(len(cls.value) for cls in SemanticClass)
    header = f"{'':<{name_width}}  Precision  Recall  Accuracy      F1"
    rows = [header]
    for cls in SemanticClass:
        m = report.per_class[cls]
        rows.append(f"{cls.value:<{name_width}}  {cell(m.precision):>9}  "
                    f"{cell(m.recall):>6}  {cell(m.accuracy):>8}  {cell(m.f1):>6}")
    rows.append("")
    rows.append(f"images     {report.image_count}")
    rows.append(f"mean EA    {ea_cell(report.mean_ea)}")
    rows.append(f"median EA  {ea_cell(report.median_ea)}")
    for tau in sorted(report.f1_at_tau):
        rows.append(f"F1 @ tau={tau:.2f}  {cell(report.f1_at_tau[tau])}")
    return "\n".join(rows) + "\n"


def read_report(json_path: Path) -> EvalReport:
    path = Path(json_path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc.msg})") from exc
    try:
        per_class = {}
        for cls in SemanticClass:
            entry = payload["classes"][cls.value]
            per_class[cls] = ClassMetrics(
                tp=int(entry["tp"]), fp=int(entry["fp"]),
                fn=int(entry["fn"]), tn=int(entry["tn"]),
                precision=entry["precision"], recall=entry["recall"],
                accuracy=entry["accuracy"], f1=entry["f1"],
            )
        return EvalReport(
            image_count=int(payload["image_count"]),
            per_class=per_class,
            mean_ea=payload["mean_ea"],
            median_ea=payload["median_ea"],
            f1_at_tau={float(tau): f1 for tau, f1 in payload["f1_at_tau"].items()},
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path}: malformed report ({exc})") from exc
