"""Line placement scoring and dataset evaluation: the squared
Euclidean-and-Angular similarity with its existence special cases, confusion
counting with an optional placement threshold, and the per-class report."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, NamedTuple, Sequence

from .extraction import LinePrediction, SemanticClass
from .geometry import (ImageGeometry, ParametricLine, angle_between,
                       clip_to_image, midpoint_distance)

DEFAULT_TAUS = (0.0, 0.95)


class Outcome(NamedTuple):
    """Confusion-count increments for one (prediction, truth) slot.  A
    present-but-misplaced pair below the placement threshold counts as a
    false positive and a false negative at once."""

    tp: int
    fp: int
    fn: int
    tn: int


@dataclass(frozen=True)
class ClassMetrics:
    """Presence-level confusion counts and the derived rates; a rate whose
    denominator is zero is reported as None rather than 0 or 1."""

    tp: int
    fp: int
    fn: int
    tn: int
    precision: float | None
    recall: float | None
    accuracy: float | None
    f1: float | None


@dataclass(frozen=True)
class EvalReport:
    image_count: int
    per_class: dict[SemanticClass, ClassMetrics]
    mean_ea: float | None
    median_ea: float | None
    f1_at_tau: dict[float, float | None]


def ea_score(pred: ParametricLine | None, truth: ParametricLine | None,
             geom: ImageGeometry) -> float:
    """Similarity of two lines in [0, 1]: 1 for agreement on absence, 0 for
    an existence mismatch, otherwise the squared product of the angular and
    midpoint-distance terms."""
    if pred is None and truth is None:
        return 1.0
    if pred is None or truth is None:
        return 0.0
    seg_p = clip_to_image(pred, geom)
    seg_t = clip_to_image(truth, geom)
    if seg_p is None or seg_t is None:
        return 0.0
    angular = 1.0 - angle_between(pred, truth) / (math.pi / 2.0)
    distance = 1.0 - midpoint_distance(seg_p, seg_t, geom)
    return (angular * distance) ** 2


def classify_outcome(pred_present: bool, truth_present: bool, ea: float,
                     tau: float) -> Outcome:
    """Confusion counting for one class slot at placement threshold tau;
    tau = 0 reduces to pure presence counting."""
    if not (0.0 <= tau <= 1.0):
        raise ValueError(f"tau must lie in [0, 1], got {tau}")
    if not pred_present and not truth_present:
        return Outcome(0, 0, 0, 1)
    if pred_present and not truth_present:
        return Outcome(0, 1, 0, 0)
    if not pred_present and truth_present:
        return Outcome(0, 0, 1, 0)
    if ea >= tau:
        return Outcome(1, 0, 0, 0)
    return Outcome(0, 1, 1, 0)


def _ratio(num: int, den: int) -> float | None:
    return num / den if den > 0 else None


def _f1(precision: float | None, recall: float | None) -> float | None:
    if precision is None or recall is None or precision + recall == 0:
        return None
    return 2.0 * precision * recall / (precision + recall)


def _truth_line(value: ParametricLine | LinePrediction) -> ParametricLine:
    return value.line if isinstance(value, LinePrediction) else value


TruthSet = Mapping[SemanticClass, "ParametricLine | LinePrediction"]


def evaluate(dataset: Sequence[tuple[Mapping[SemanticClass, LinePrediction], TruthSet]],
             geom: ImageGeometry,
             taus: Sequence[float] = DEFAULT_TAUS) -> EvalReport:
    """Score aligned (prediction, ground truth) pairs: per-class confusion at
    presence level, placement-score aggregates over every slot where at least
    one side exists, and pooled dataset F1 at each placement threshold."""
    if len(dataset) == 0:
        raise ValueError("evaluate needs a non-empty dataset")
    counts = {cls: [0, 0, 0, 0] for cls in SemanticClass}
    pooled = {tau: [0, 0, 0, 0] for tau in taus}
    eas: list[float] = []
    for preds, truths in dataset:
        for cls in SemanticClass:
            pred = preds.get(cls)
            truth = truths.get(cls)
            ea = ea_score(pred.line if pred else None,
                          _truth_line(truth) if truth is not None else None,
                          geom)
            if pred is not None or truth is not None:
                eas.append(ea)
            out = classify_outcome(pred is not None, truth is not None, ea, 0.0)
            for k in range(4):
                counts[cls][k] += out[k]
            for tau in taus:
                out_tau = classify_outcome(pred is not None, truth is not None, ea, tau)
                for k in range(4):
                    pooled[tau][k] += out_tau[k]
    per_class = {}
    for cls, (tp, fp, fn, tn) in counts.items():
        precision = _ratio(tp, tp + fp)
        recall = _ratio(tp, tp + fn)
        per_class[cls] = ClassMetrics(
            tp=tp, fp=fp, fn=fn, tn=tn,
            precision=precision, recall=recall,
            accuracy=_ratio(tp + tn, tp + fp + fn + tn),
            f1=_f1(precision, recall),
        )
    f1_at_tau = {}
    for tau, (tp, fp, fn, _) in pooled.items():
        f1_at_tau[tau] = _f1(_ratio(tp, tp + fp), _ratio(tp, tp + fn))
    eas_sorted = sorted(eas)
    n = len(eas_sorted)
    if n == 0:
        mean_ea = median_ea = None
    else:
        mean_ea = sum(eas_sorted) / n
        mid = n // 2
        median_ea = eas_sorted[mid] if n % 2 else (eas_sorted[mid - 1] + eas_sorted[mid]) / 2.0
    return EvalReport(
        image_count=len(dataset),
        per_class=per_class,
        mean_ea=mean_ea,
        median_ea=median_ea,
        f1_at_tau=f1_at_tau,
    )
