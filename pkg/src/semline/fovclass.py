"""Binary field-of-view quality: the detection-presence prediction rule and
the geometric ground-truth labeler used on synthetic scenes."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Sequence

from .extraction import SemanticClass
from .synth import SceneSpec, corridor_vanishing_point, project_scene


class FovLabel(Enum):
    GOOD = "Good"
    BAD = "Bad"


# the prediction rule checks these four; WallEndCap is deliberately ignored
REQUIRED_CLASSES = (
    SemanticClass.AISLE_LEFT,
    SemanticClass.AISLE_RIGHT,
    SemanticClass.RACK_TOP_LEFT,
    SemanticClass.RACK_TOP_RIGHT,
)


@dataclass(frozen=True)
class FovCriteria:
    """The four ground-truth conditions; a view is Good iff all hold."""

    single_aisle_visible: bool
    full_racks_both_sides: bool
    rack_tops_visible: bool
    aisle_centered: bool

    @property
    def all_met(self) -> bool:
        return (self.single_aisle_visible and self.full_racks_both_sides
                and self.rack_tops_visible and self.aisle_centered)


@dataclass(frozen=True)
class FovCriteriaConfig:
    """Quantitative knobs behind the qualitative criteria."""

    center_band_fraction: float = 1.0 / 3.0  # of image width, centered

    def __post_init__(self) -> None:
        if not (0.0 < self.center_band_fraction <= 1.0):
            raise ValueError("center_band_fraction must lie in (0, 1]")


DEFAULT_CRITERIA = FovCriteriaConfig()


def predict_fov(preds: Mapping[SemanticClass, object]) -> FovLabel:
    """Good iff both aisle lines and both rack-top lines were detected,
    regardless of placement."""
    present = all(cls in preds for cls in REQUIRED_CLASSES)
    return FovLabel.GOOD if present else FovLabel.BAD


def ground_truth_fov(spec: SceneSpec,
                     config: FovCriteriaConfig = DEFAULT_CRITERIA
                     ) -> tuple[FovLabel, FovCriteria]:
    """Label a synthetic scene from its analytic projection:

      a. a forward corridor view with both shelf-floor lines visible;
      b. the camera laterally between the two shelf faces;
      c. both rack-top lines visible in frame;
      d. the corridor vanishing point inside the central horizontal band.
    """
    lines = project_scene(spec)
    vp = corridor_vanishing_point(spec)
    aisles_visible = (SemanticClass.AISLE_LEFT in lines
                      and SemanticClass.AISLE_RIGHT in lines)
    criteria = FovCriteria(
        single_aisle_visible=vp is not None and aisles_visible,
        full_racks_both_sides=abs(spec.camera[0]) < spec.aisle_width / 2.0,
        rack_tops_visible=(SemanticClass.RACK_TOP_LEFT in lines
                           and SemanticClass.RACK_TOP_RIGHT in lines),
        aisle_centered=_vp_centered(vp, spec.image_size, config),
    )
    label = FovLabel.GOOD if criteria.all_met else FovLabel.BAD
    return label, criteria


def _vp_centered(vp: tuple[float, float] | None, width: int,
                 config: FovCriteriaConfig) -> bool:
    if vp is None:
        return False
    half_band = config.center_band_fraction * width / 2.0
    return abs(vp[0] - width / 2.0) <= half_band


def fov_accuracy(dataset: Sequence[tuple[FovLabel, FovLabel]]) -> float:
    """Fraction of (predicted, truth) pairs that agree."""
    if len(dataset) == 0:
        raise ValueError("fov_accuracy needs a non-empty dataset")
    return sum(1 for pred, truth in dataset if pred == truth) / len(dataset)
