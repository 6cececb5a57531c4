"""Semantic line detection over multi-scale Hough voting, with EA-score
evaluation, camera field-of-view auditing, and a synthetic store-aisle
scene generator for end-to-end verification."""

from .extraction import (ClassPredictionSet, LinePrediction, Region,
                         SemanticClass, extract_regions, select_per_class)
from .fovclass import (FovCriteria, FovLabel, fov_accuracy, ground_truth_fov,
                       predict_fov)
from .frontend import (FeaturePyramid, build_pyramid, gradient_magnitude,
                       to_grayscale)
from .geometry import (HoughGridSpec, ImageGeometry, ParametricLine, Segment,
                       angle_between, bin_to_line, clip_to_image,
                       line_through_points, line_to_bin, midpoint_distance)
from .hough import (MultiScaleHough, aggregate_pyramid, benchmark_kernels,
                    interpolate, level_spec, normalize, vote_optimized,
                    vote_reference)
from .metrics import (ClassMetrics, EvalReport, Outcome, classify_outcome,
                      ea_score, evaluate)
from .pipeline import (SYNTH_CHANNEL_THRESHOLD, class_activations,
                       detect_activations, detect_channels, detect_image)
from .synth import (GroundTruthLine, SceneSpec, SweepRanges, generate_sweep,
                    project_scene, render_class_channels, render_scene)

__version__ = "0.1.0"
