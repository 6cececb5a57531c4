"""End-to-end detection paths gluing the stages together.

Two input shapes exist.  Per-class intensity channels (synthetic scenes, or
any upstream source that can separate classes) are voted independently but
normalized jointly, so the confidence threshold can compare channels against
each other: a channel holding only clutter and sensor noise stays well below
a channel holding a real line.  A plain RGB image has no class separation
without a trained encoder, so it runs the single-map path and every class
sees the same aggregated accumulator; that mode exists for real imagery and
for externally produced activation files.
"""

from __future__ import annotations

from typing import Mapping

import numpy as np

from .extraction import ClassPredictionSet, SemanticClass, select_per_class
from .frontend import build_pyramid, gradient_magnitude, to_grayscale
from .geometry import HoughGridSpec, ImageGeometry
from .hough import VOTE_KERNELS, aggregate_pyramid, interpolate, level_spec

# Presence threshold calibrated for jointly normalized synthetic channels:
# clutter/noise-only channels peak below ~0.28 on the default sweep while
# genuine line channels peak above ~0.32.
SYNTH_CHANNEL_THRESHOLD = 0.32


def class_activations(channels: Mapping[SemanticClass, np.ndarray],
                      base_spec: HoughGridSpec,
                      kernel: str = "optimized") -> dict[SemanticClass, np.ndarray]:
    """Multi-scale Hough activations for per-class intensity channels.

    Each channel is voted at four pyramid levels; at every level the five
    accumulators are min-max normalized jointly (one scale across channels),
    resampled to the base grid, and averaged, with one final joint rescale.
    All outputs lie in [0, 1] and relative channel strength is preserved.
    """
    if set(channels) != set(SemanticClass):
        missing = sorted(c.value for c in SemanticClass if c not in channels)
        raise ValueError(f"need all five class channels, missing: {missing}")
    shapes = {m.shape for m in channels.values()}
    if len(shapes) != 1:
        raise ValueError(f"channel shapes disagree: {sorted(shapes)}")
    vote = VOTE_KERNELS[kernel]
    pyramids = {cls: build_pyramid(m) for cls, m in channels.items()}
    n_levels = len(next(iter(pyramids.values())).levels)

    aggregated = {cls: np.zeros(base_spec.shape) for cls in SemanticClass}
    for k in range(n_levels):
        spec_k = level_spec(base_spec, k)
        votes = {}
        for cls in SemanticClass:
            level = pyramids[cls].levels[k]
            geom_k = ImageGeometry(level.shape[1], level.shape[0])
            votes[cls] = vote(level, spec_k, geom_k)
        lo = min(v.min() for v in votes.values())
        span = max(v.max() for v in votes.values()) - lo
        for cls in SemanticClass:
            scaled = (votes[cls] - lo) / span if span > 0 else np.zeros_like(votes[cls])
            aggregated[cls] += interpolate(scaled, base_spec) / n_levels
    lo = min(a.min() for a in aggregated.values())
    span = max(a.max() for a in aggregated.values()) - lo
    for cls in SemanticClass:
        if span > 0:
            aggregated[cls] = (aggregated[cls] - lo) / span
        else:
            aggregated[cls] = np.zeros_like(aggregated[cls])
    return aggregated


def detect_channels(channels: Mapping[SemanticClass, np.ndarray],
                    base_spec: HoughGridSpec, threshold: float,
                    kernel: str = "optimized") -> ClassPredictionSet:
    """Per-class line predictions from per-class intensity channels."""
    acts = class_activations(channels, base_spec, kernel)
    h, w = next(iter(channels.values())).shape
    return select_per_class(acts, threshold, base_spec, ImageGeometry(w, h))


def detect_activations(acts: Mapping[SemanticClass, np.ndarray],
                       geom: ImageGeometry, threshold: float) -> ClassPredictionSet:
    """Per-class line predictions from externally produced Hough activations
    (already in [0, 1] on a shared grid)."""
    first = next(iter(acts.values()))
    spec = HoughGridSpec(first.shape[0], first.shape[1])
    return select_per_class(acts, threshold, spec, geom)


def detect_image(rgb: np.ndarray, base_spec: HoughGridSpec, threshold: float,
                 kernel: str = "optimized") -> ClassPredictionSet:
    """Classless single-map path for RGB imagery: edge response, pyramid,
    aggregate, and the same accumulator offered to every class head."""
    edges = gradient_magnitude(to_grayscale(rgb))
    pyramid = build_pyramid(edges)
    geom = ImageGeometry(rgb.shape[1], rgb.shape[0])
    multi = aggregate_pyramid(pyramid, base_spec, geom, kernel=kernel)
    acts = {cls: multi.aggregated for cls in SemanticClass}
    return select_per_class(acts, threshold, base_spec, geom)
