"""Parametric line geometry: the normal-form <theta, r> representation,
Hough grid quantization, and the clipping/distance primitives the scoring
metric is built on.

Conventions used throughout the package:
  - image coordinates: x right, y down, continuous, origin at the top-left
    corner, so the image occupies [0, W] x [0, H];
  - the Hough origin sits at the image center and a line is the locus
    x'*cos(theta) + y'*sin(theta) = r in center-relative coordinates
    (x', y') = (x - W/2, y - H/2);
  - theta lies in [0, pi) and r in [-R, R] with R = half the image diagonal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

_EPS = 1e-12
_DEGENERATE_CHORD = 1e-9  # chords shorter than this count as empty clips


@dataclass(frozen=True)
class ImageGeometry:
    """Pixel dimensions of the image a line lives in."""

    width: int
    height: int

    def __post_init__(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"image dimensions must be positive, got {self.width}x{self.height}")

    @property
    def center(self) -> tuple[float, float]:
        return self.width / 2.0, self.height / 2.0

    @property
    def diagonal(self) -> float:
        return math.hypot(self.width, self.height)

    @property
    def half_diagonal(self) -> float:
        """Largest |r| any line intersecting the image can have."""
        return self.diagonal / 2.0


@dataclass(frozen=True)
class HoughGridSpec:
    """Accumulator resolution: angle bins by distance bins."""

    n_theta: int = 150
    n_r: int = 150

    def __post_init__(self) -> None:
        if self.n_theta < 2 or self.n_r < 2:
            raise ValueError(f"grid needs at least 2x2 bins, got {self.n_theta}x{self.n_r}")

    @property
    def shape(self) -> tuple[int, int]:
        return self.n_theta, self.n_r


@dataclass(frozen=True)
class ParametricLine:
    """A full-image line as normal angle theta in [0, pi) and signed
    center distance r in pixels."""

    theta: float
    r: float

    @staticmethod
    def normalized(theta: float, r: float) -> "ParametricLine":
        """Fold an arbitrary (theta, r) into the canonical half-range using
        the (theta + pi, -r) identity."""
        theta = math.fmod(theta, math.pi)
        if theta < 0.0:
            theta += math.pi
            r = -r
        if theta >= math.pi:  # fmod can land exactly on pi
            theta -= math.pi
            r = -r
        return ParametricLine(theta, r)


@dataclass(frozen=True)
class Segment:
    """A chord of the image rectangle, as two endpoints in pixel coordinates."""

    p0: tuple[float, float]
    p1: tuple[float, float]

    @property
    def midpoint(self) -> tuple[float, float]:
        return (self.p0[0] + self.p1[0]) / 2.0, (self.p0[1] + self.p1[1]) / 2.0

    @property
    def length(self) -> float:
        return math.hypot(self.p1[0] - self.p0[0], self.p1[1] - self.p0[1])


def bin_to_line(i: float, j: float, spec: HoughGridSpec, geom: ImageGeometry) -> ParametricLine:
    """Map (theta-bin, r-bin) coordinates to the continuous line at the bin
    center.  Fractional coordinates are allowed so region centroids can be
    converted directly; integer bins are the exact inverse of line_to_bin.
    """
    if not (0 <= i < spec.n_theta):
        raise ValueError(f"theta bin {i} outside [0, {spec.n_theta})")
    if not (0 <= j < spec.n_r):
        raise ValueError(f"r bin {j} outside [0, {spec.n_r})")
    big_r = geom.half_diagonal
    theta = (i + 0.5) * math.pi / spec.n_theta
    r = ((j + 0.5) / spec.n_r) * 2.0 * big_r - big_r
    return ParametricLine(theta, r)


def line_to_bin(line: ParametricLine, spec: HoughGridSpec, geom: ImageGeometry) -> tuple[int, int]:
    """Quantize a line to grid indices; boundary values clamp into range."""
    big_r = geom.half_diagonal
    i = int(math.floor(line.theta * spec.n_theta / math.pi))
    j = int(math.floor((line.r + big_r) * spec.n_r / (2.0 * big_r)))
    return min(max(i, 0), spec.n_theta - 1), min(max(j, 0), spec.n_r - 1)


def _param_interval(px: float, py: float, dx: float, dy: float,
                    x_lo: float, x_hi: float, y_lo: float, y_hi: float,
                    t_min: float, t_max: float) -> tuple[float, float] | None:
    """Intersect the parametric line (px, py) + t (dx, dy) with an axis box,
    starting from the parameter window [t_min, t_max]."""
    for p, d, lo, hi in ((px, dx, x_lo, x_hi), (py, dy, y_lo, y_hi)):
        if abs(d) < _EPS:
            if p < lo or p > hi:
                return None
        else:
            t0 = (lo - p) / d
            t1 = (hi - p) / d
            if t0 > t1:
                t0, t1 = t1, t0
            t_min = max(t_min, t0)
            t_max = min(t_max, t1)
            if t_min > t_max:
                return None
    return t_min, t_max


def clip_to_image(line: ParametricLine, geom: ImageGeometry) -> Segment | None:
    """Chord of the infinite line with the image rectangle, or None when the
    intersection is empty or degenerates to a point."""
    cx, cy = geom.center
    cos_t = math.cos(line.theta)
    sin_t = math.sin(line.theta)
    # base point on the line plus its direction, in center-relative coords
    px, py = line.r * cos_t, line.r * sin_t
    dx, dy = -sin_t, cos_t
    window = _param_interval(px, py, dx, dy, -cx, cx, -cy, cy, -math.inf, math.inf)
    if window is None:
        return None
    t0, t1 = window
    if t1 - t0 < _DEGENERATE_CHORD:
        return None
    return Segment(
        (cx + px + t0 * dx, cy + py + t0 * dy),
        (cx + px + t1 * dx, cy + py + t1 * dy),
    )


def angle_between(a: ParametricLine, b: ParametricLine) -> float:
    """Acute angle between two lines, in [0, pi/2]."""
    d = abs(a.theta - b.theta)
    return min(d, math.pi - d)


def midpoint_distance(a: Segment, b: Segment, geom: ImageGeometry) -> float:
    """Euclidean distance between segment midpoints, normalized by the image
    diagonal and clamped to [0, 1]."""
    if a.length < _DEGENERATE_CHORD or b.length < _DEGENERATE_CHORD:
        raise ValueError("midpoint_distance requires non-degenerate segments")
    ma, mb = a.midpoint, b.midpoint
    d = math.hypot(ma[0] - mb[0], ma[1] - mb[1]) / geom.diagonal
    return min(d, 1.0)


def line_through_points(p0: tuple[float, float], p1: tuple[float, float],
                        geom: ImageGeometry) -> ParametricLine | None:
    """Normal form of the infinite line through two pixel-coordinate points,
    or None when the points coincide."""
    dx, dy = p1[0] - p0[0], p1[1] - p0[1]
    norm = math.hypot(dx, dy)
    if norm < _EPS:
        return None
    nx, ny = dy / norm, -dx / norm
    cx, cy = geom.center
    theta = math.atan2(ny, nx)
    r = (p0[0] - cx) * nx + (p0[1] - cy) * ny
    return ParametricLine.normalized(theta, r)


def line_intersection(a: ParametricLine, b: ParametricLine,
                      geom: ImageGeometry) -> tuple[float, float] | None:
    """Intersection point of two lines in pixel coordinates, or None when
    they are (near-)parallel."""
    det = math.sin(b.theta - a.theta)
    if abs(det) < 1e-9:
        return None
    ca, sa = math.cos(a.theta), math.sin(a.theta)
    cb, sb = math.cos(b.theta), math.sin(b.theta)
    x = (a.r * sb - b.r * sa) / det
    y = (b.r * ca - a.r * cb) / det
    cx, cy = geom.center
    return x + cx, y + cy
