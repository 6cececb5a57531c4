"""Synthetic store-aisle scenes: a parametric corridor (two shelf rows, a
floor, an end wall) viewed through a pinhole camera.  Each scene yields an
edge-intensity rendering plus analytic ground-truth lines, which is what lets
the voting/extraction/scoring stages be verified end to end without real
imagery or a trained encoder.

World frame: x lateral (right positive), y up, z down the aisle.  The floor
is y = 0, shelf faces are the planes x = +-aisle_width/2 running from z = 0
to z = aisle_length, and the end wall is z = aisle_length.  At yaw = pitch =
0 the camera looks along +z; positive yaw turns toward +x, positive pitch
tilts upward.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterator, NamedTuple

import numpy as np

from .extraction import SemanticClass
from .geometry import ImageGeometry, ParametricLine, Segment, line_through_points

NEAR_PLANE_M = 0.05
VISIBLE_EXTENT_FRACTION = 0.05  # of the image diagonal; shorter edges are absent
STROKE_SIGMA_PX = 1.0
STROKE_RADIUS_PX = 3.0
CLUTTER_LENGTH_FRACTION = (0.05, 0.15)  # of the image diagonal
CLUTTER_PEAK = (0.1, 0.5)


@dataclass(frozen=True)
class SceneSpec:
    """One corridor plus one camera pose; fully determines both the render
    and the analytic ground truth."""

    aisle_width: float = 1.8
    shelf_height: float = 2.0
    aisle_length: float = 12.0
    camera: tuple[float, float, float] = (0.0, 1.6, 0.0)
    yaw: float = 0.0
    pitch: float = 0.0
    focal_length: float = 450.0
    image_size: int = 600
    clutter_lines: int = 0
    noise_sigma: float = 0.0
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if min(self.aisle_width, self.shelf_height, self.aisle_length) <= 0:
            raise ValueError("corridor dimensions must be positive")
        if self.focal_length <= 0:
            raise ValueError("focal length must be positive")
        if self.image_size < 16:
            raise ValueError("image size must be at least 16 pixels")
        if self.clutter_lines < 0:
            raise ValueError("clutter_lines must be non-negative")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")
        if self.camera[2] >= self.aisle_length:
            raise ValueError("camera must sit inside or behind the corridor")
        if self.camera[1] <= 0:
            raise ValueError("camera must sit above the floor")

    @property
    def geometry(self) -> ImageGeometry:
        return ImageGeometry(self.image_size, self.image_size)


@dataclass(frozen=True)
class GroundTruthLine:
    """A projected corridor edge: its infinite-line parameters and the
    in-image visible extent."""

    line: ParametricLine
    extent: Segment


GroundTruthLines = dict[SemanticClass, GroundTruthLine]


def _corridor_edges(spec: SceneSpec) -> dict[SemanticClass, tuple[tuple, tuple]]:
    half = spec.aisle_width / 2.0
    h, length = spec.shelf_height, spec.aisle_length
    return {
        SemanticClass.AISLE_LEFT: ((-half, 0.0, 0.0), (-half, 0.0, length)),
        SemanticClass.AISLE_RIGHT: ((half, 0.0, 0.0), (half, 0.0, length)),
        SemanticClass.RACK_TOP_LEFT: ((-half, h, 0.0), (-half, h, length)),
        SemanticClass.RACK_TOP_RIGHT: ((half, h, 0.0), (half, h, length)),
        SemanticClass.WALL_END_CAP: ((-half, 0.0, length), (half, 0.0, length)),
    }


def _to_camera(spec: SceneSpec, p: tuple[float, float, float]) -> tuple[float, float, float]:
    """World point to camera frame (right, up, forward)."""
    dx = p[0] - spec.camera[0]
    dy = p[1] - spec.camera[1]
    dz = p[2] - spec.camera[2]
    cos_y, sin_y = math.cos(spec.yaw), math.sin(spec.yaw)
    cos_p, sin_p = math.cos(spec.pitch), math.sin(spec.pitch)
    x1 = dx * cos_y - dz * sin_y
    z1 = dx * sin_y + dz * cos_y
    up = dy * cos_p - z1 * sin_p
    fwd = dy * sin_p + z1 * cos_p
    return x1, up, fwd


def _project(spec: SceneSpec, cam: tuple[float, float, float]) -> tuple[float, float]:
    """Pinhole projection of a camera-frame point to pixel coordinates."""
    half = spec.image_size / 2.0
    u = half + spec.focal_length * cam[0] / cam[2]
    v = half - spec.focal_length * cam[1] / cam[2]
    return u, v


def corridor_vanishing_point(spec: SceneSpec) -> tuple[float, float] | None:
    """Pixel coordinates of the down-the-aisle direction's vanishing point,
    or None when the camera faces away from the corridor."""
    cos_y, sin_y = math.cos(spec.yaw), math.sin(spec.yaw)
    cos_p, sin_p = math.cos(spec.pitch), math.sin(spec.pitch)
    x1, z1 = -sin_y, cos_y
    up = -z1 * sin_p
    fwd = z1 * cos_p
    if fwd <= 1e-9:
        return None
    return _project(spec, (x1, up, fwd))


def _clip_segment_to_rect(p0: tuple[float, float], p1: tuple[float, float],
                          w: float, h: float) -> Segment | None:
    """Portion of a finite 2-D segment inside [0, w] x [0, h]."""
    dx, dy = p1[0] - p0[0], p1[1] - p0[1]
    t_min, t_max = 0.0, 1.0
    for p, d, lo, hi in ((p0[0], dx, 0.0, w), (p0[1], dy, 0.0, h)):
        if abs(d) < 1e-15:
            if p < lo or p > hi:
                return None
        else:
            t0, t1 = (lo - p) / d, (hi - p) / d
            if t0 > t1:
                t0, t1 = t1, t0
            t_min, t_max = max(t_min, t0), min(t_max, t1)
    if t_max <= t_min:
        return None
    return Segment((p0[0] + t_min * dx, p0[1] + t_min * dy),
                   (p0[0] + t_max * dx, p0[1] + t_max * dy))


def project_scene(spec: SceneSpec) -> GroundTruthLines:
    """Project the five corridor edges; an edge is absent when it falls
    behind the camera, outside the frame, or its visible extent is shorter
    than 5% of the image diagonal."""
    geom = spec.geometry
    out: GroundTruthLines = {}
    for cls, (a_world, b_world) in _corridor_edges(spec).items():
        a = _to_camera(spec, a_world)
        b = _to_camera(spec, b_world)
        if a[2] < NEAR_PLANE_M and b[2] < NEAR_PLANE_M:
            continue
        if a[2] < NEAR_PLANE_M:
            t = (NEAR_PLANE_M - a[2]) / (b[2] - a[2])
            a = tuple(a[k] + t * (b[k] - a[k]) for k in range(3))
        elif b[2] < NEAR_PLANE_M:
            t = (NEAR_PLANE_M - b[2]) / (a[2] - b[2])
            b = tuple(b[k] + t * (a[k] - b[k]) for k in range(3))
        pa = _project(spec, a)
        pb = _project(spec, b)
        extent = _clip_segment_to_rect(pa, pb, geom.width, geom.height)
        if extent is None or extent.length < VISIBLE_EXTENT_FRACTION * geom.diagonal:
            continue
        line = line_through_points(pa, pb, geom)
        if line is None:
            continue
        out[cls] = GroundTruthLine(line, extent)
    return out


def _stroke(canvas: np.ndarray, seg: Segment, peak: float) -> None:
    """Blend an anti-aliased Gaussian-profile stroke into the canvas (max
    combine, so peaks never exceed the stroke peak)."""
    h, w = canvas.shape
    (x0, y0), (x1, y1) = seg.p0, seg.p1
    r = STROKE_RADIUS_PX
    col0 = max(0, int(math.floor(min(x0, x1) - r - 1)))
    col1 = min(w, int(math.ceil(max(x0, x1) + r + 1)))
    row0 = max(0, int(math.floor(min(y0, y1) - r - 1)))
    row1 = min(h, int(math.ceil(max(y0, y1) + r + 1)))
    if col0 >= col1 or row0 >= row1:
        return
    ys, xs = np.mgrid[row0:row1, col0:col1]
    px = xs + 0.5
    py = ys + 0.5
    vx, vy = x1 - x0, y1 - y0
    norm2 = vx * vx + vy * vy
    if norm2 <= 0:
        return
    t = ((px - x0) * vx + (py - y0) * vy) / norm2
    np.clip(t, 0.0, 1.0, out=t)
    d2 = (px - (x0 + t * vx)) ** 2 + (py - (y0 + t * vy)) ** 2
    values = np.where(d2 <= r * r,
                      peak * np.exp(-d2 / (2.0 * STROKE_SIGMA_PX ** 2)), 0.0)
    np.maximum(canvas[row0:row1, col0:col1], values,
               out=canvas[row0:row1, col0:col1])


class _SceneParts(NamedTuple):
    lines: GroundTruthLines
    class_strokes: dict[SemanticClass, np.ndarray]
    clutter: np.ndarray
    noise: np.ndarray


def _scene_parts(spec: SceneSpec) -> _SceneParts:
    """Shared rendering internals so the combined image and the per-class
    channels see identical clutter and noise for a given seed."""
    size = spec.image_size
    lines = project_scene(spec)
    class_strokes = {}
    for cls, gt in lines.items():
        canvas = np.zeros((size, size))
        _stroke(canvas, gt.extent, 1.0)
        class_strokes[cls] = canvas
    rng = np.random.default_rng(spec.rng_seed)
    clutter = np.zeros((size, size))
    diag = spec.geometry.diagonal
    for _ in range(spec.clutter_lines):
        cx, cy = rng.uniform(0, size, 2)
        angle = rng.uniform(0, math.pi)
        half_len = rng.uniform(*CLUTTER_LENGTH_FRACTION) * diag / 2.0
        peak = rng.uniform(*CLUTTER_PEAK)
        dx, dy = math.cos(angle) * half_len, math.sin(angle) * half_len
        _stroke(clutter, Segment((cx - dx, cy - dy), (cx + dx, cy + dy)), peak)
    if spec.noise_sigma > 0:
        noise = rng.normal(0.0, spec.noise_sigma, (size, size))
    else:
        noise = np.zeros((size, size))
    return _SceneParts(lines, class_strokes, clutter, noise)


def _compose(stroke_map: np.ndarray, parts: _SceneParts) -> np.ndarray:
    out = np.maximum(stroke_map, parts.clutter) + parts.noise
    np.clip(out, 0.0, None, out=out)
    return out


def render_scene(spec: SceneSpec) -> np.ndarray:
    """Edge-intensity rendering of every visible ground-truth line plus
    clutter and noise; deterministic for a fixed seed."""
    parts = _scene_parts(spec)
    combined = np.zeros((spec.image_size, spec.image_size))
    for stroke_map in parts.class_strokes.values():
        np.maximum(combined, stroke_map, out=combined)
    return _compose(combined, parts)


def render_class_channels(spec: SceneSpec) -> dict[SemanticClass, np.ndarray]:
    """Per-class intensity channels: each class keeps only its own stroke,
    while clutter and noise land in every channel."""
    parts = _scene_parts(spec)
    zero = np.zeros((spec.image_size, spec.image_size))
    return {cls: _compose(parts.class_strokes.get(cls, zero), parts)
            for cls in SemanticClass}


@dataclass(frozen=True)
class SweepRanges:
    """Uniform sampling intervals for the camera pose.  Defaults were
    calibrated on the default corridor so the sweep mixes good and bad views
    and failure-to-see correlates with the labeler's criteria."""

    cam_x: tuple[float, float] = (-0.63, 0.63)
    cam_y: tuple[float, float] = (1.2, 2.0)
    cam_z: tuple[float, float] = (-0.5, 3.0)
    yaw: tuple[float, float] = (-0.20, 0.20)
    pitch: tuple[float, float] = (-0.85, 0.10)

    def __post_init__(self) -> None:
        for name in ("cam_x", "cam_y", "cam_z", "yaw", "pitch"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"degenerate range for {name}: ({lo}, {hi})")


class SweepItem(NamedTuple):
    spec: SceneSpec
    image: np.ndarray
    lines: GroundTruthLines
    fov: "FovLabel"  # noqa: F821 - fovclass imports this module


def generate_sweep(n: int, ranges: SweepRanges, seed: int,
                   template: SceneSpec = SceneSpec()) -> Iterator[SweepItem]:
    """Yield n scenes with poses sampled uniformly over the ranges.  Item i
    draws from a generator seeded with seed + i, so the sweep is reproducible
    independently of consumption order."""
    # imported here: fovclass builds on this module's projection
    from .fovclass import ground_truth_fov

    if n <= 0:
        raise ValueError(f"sweep size must be positive, got {n}")
    for i in range(n):
        rng = np.random.default_rng(seed + i)
        spec = replace(
            template,
            camera=(rng.uniform(*ranges.cam_x),
                    rng.uniform(*ranges.cam_y),
                    rng.uniform(*ranges.cam_z)),
            yaw=rng.uniform(*ranges.yaw),
            pitch=rng.uniform(*ranges.pitch),
            rng_seed=int(rng.integers(2 ** 31)),
        )
        label, _ = ground_truth_fov(spec)
        yield SweepItem(spec, render_scene(spec), project_scene(spec), label)
