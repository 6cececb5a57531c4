"""Turning per-class Hough activation maps into at most one line per
semantic class: supra-threshold region labeling, then strongest-region
selection per class."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Mapping, NamedTuple

import numpy as np
from scipy import ndimage

from .geometry import HoughGridSpec, ImageGeometry, ParametricLine, bin_to_line

_EIGHT_CONNECTED = np.ones((3, 3), dtype=int)


class SemanticClass(Enum):
    """The five store-aisle line classes; values are the stable wire names."""

    AISLE_LEFT = "AisleLeft"
    AISLE_RIGHT = "AisleRight"
    RACK_TOP_LEFT = "RackTopLeft"
    RACK_TOP_RIGHT = "RackTopRight"
    WALL_END_CAP = "WallEndCap"


CLASS_NAMES = {c.value: c for c in SemanticClass}


class Region(NamedTuple):
    """A contiguous activated blob: unweighted cell centroid plus peak value."""

    centroid_i: float
    centroid_j: float
    peak: float


@dataclass(frozen=True)
class LinePrediction:
    line: ParametricLine
    confidence: float


# at most one prediction per class; absent classes are absent keys
ClassPredictionSet = dict[SemanticClass, LinePrediction]


def extract_regions(m: np.ndarray, threshold: float) -> list[Region]:
    """8-connected components of cells strictly above threshold, ordered by
    peak descending with ties broken by the peak cell's (i, j)."""
    if not (0.0 < threshold < 1.0):
        raise ValueError(f"threshold must lie in (0, 1), got {threshold}")
    m = np.asarray(m, dtype=np.float64)
    labels, count = ndimage.label(m > threshold, structure=_EIGHT_CONNECTED)
    keyed = []
    for idx in range(1, count + 1):
        cells = np.argwhere(labels == idx)
        values = m[cells[:, 0], cells[:, 1]]
        peak = float(values.max())
        ci, cj = cells.mean(axis=0)
        peak_cells = cells[values == peak]
        order = np.lexsort((peak_cells[:, 1], peak_cells[:, 0]))
        tie_break = tuple(int(v) for v in peak_cells[order[0]])
        keyed.append((-peak, tie_break, Region(float(ci), float(cj), peak)))
    keyed.sort(key=lambda item: (item[0], item[1]))
    return [region for _, _, region in keyed]


def select_per_class(acts: Mapping[SemanticClass, np.ndarray], threshold: float,
                     spec: HoughGridSpec, geom: ImageGeometry) -> ClassPredictionSet:
    """Strongest supra-threshold region per class, converted to a line via
    the bin-center formula at the region centroid."""
    shapes = {m.shape for m in acts.values()}
    if len(shapes) > 1:
        raise ValueError(f"activation channels disagree on grid shape: {sorted(shapes)}")
    if shapes and shapes.pop() != spec.shape:
        raise ValueError("activation channels do not match the grid spec")
    preds: ClassPredictionSet = {}
    for cls, channel in acts.items():
        regions = extract_regions(channel, threshold)
        if not regions:
            continue
        best = regions[0]
        line = bin_to_line(best.centroid_i, best.centroid_j, spec, geom)
        preds[cls] = LinePrediction(line, best.peak)
    return preds
