"""Fruit detection and picking-point localisation toolkit.

Pipeline: calibrate a pixel->world homography from a planar grid,
detect fruits (built-in HSV colour segmentation or an external detector
over a line-delimited JSON protocol), localise bounding-box midpoints on
the grid plane, and benchmark robustness on synthetic scenes with
parametric lighting and background disturbances.
"""

from .detect import (
    BackendHandle,
    ClassMap,
    Detection,
    DetectionRequest,
    FRUIT_CLASSES,
    detect_external,
    detect_hsv,
    stub_backend,
)
from .errors import (
    BackendError,
    BackendExited,
    BackendTimeout,
    DegenerateConfiguration,
    EmptyInput,
    FruitGridError,
    GridTooSmall,
    InsufficientCorrespondences,
    NoMatches,
    PointAtInfinity,
    ProtocolViolation,
    ScriptExhausted,
)
from .estimators import HomographyTransformer, HsvFruitDetector
from .evaluate import (
    MatchResult,
    MetricsReport,
    aggregate_metrics,
    detection_rate,
    emit_report,
    localisation_error,
    match_detections,
)
from .geometry import (
    BoundingBox,
    CameraIntrinsics,
    CameraMatrix,
    Correspondence,
    ExtrinsicPose,
    HomogeneousPixel,
    Homography,
    PixelPoint,
    WorldPoint,
    apply_homography,
    bbox_midpoint,
    compose_camera_matrix,
    estimate_homography,
    read_calibration,
    reprojection_error,
    transform_points,
    write_calibration,
)
from .hsv import (
    DEFAULT_FRUIT_RANGES,
    HsvRange,
    extract_components,
    load_hsv_ranges,
    morphological_open_close,
    rgb_to_hsv,
    threshold_mask,
)
from .synth import (
    DisturbanceConfig,
    FruitSpec,
    GroundTruth,
    SceneConfig,
    generate_pattern,
    grid_correspondences,
    render_scene,
)

__version__ = "0.1.0"

__all__ = [
    # geometry
    "BoundingBox",
    "CameraIntrinsics",
    "CameraMatrix",
    "Correspondence",
    "ExtrinsicPose",
    "HomogeneousPixel",
    "Homography",
    "PixelPoint",
    "WorldPoint",
    "apply_homography",
    "bbox_midpoint",
    "compose_camera_matrix",
    "estimate_homography",
    "read_calibration",
    "reprojection_error",
    "transform_points",
    "write_calibration",
    # segmentation
    "DEFAULT_FRUIT_RANGES",
    "HsvRange",
    "extract_components",
    "load_hsv_ranges",
    "morphological_open_close",
    "rgb_to_hsv",
    "threshold_mask",
    # detection
    "BackendHandle",
    "ClassMap",
    "Detection",
    "DetectionRequest",
    "FRUIT_CLASSES",
    "detect_external",
    "detect_hsv",
    "stub_backend",
    # synthetic scenes
    "DisturbanceConfig",
    "FruitSpec",
    "GroundTruth",
    "SceneConfig",
    "generate_pattern",
    "grid_correspondences",
    "render_scene",
    # evaluation
    "MatchResult",
    "MetricsReport",
    "aggregate_metrics",
    "detection_rate",
    "emit_report",
    "localisation_error",
    "match_detections",
    # sklearn-style wrappers
    "HomographyTransformer",
    "HsvFruitDetector",
    # errors
    "FruitGridError",
    "InsufficientCorrespondences",
    "DegenerateConfiguration",
    "PointAtInfinity",
    "EmptyInput",
    "NoMatches",
    "GridTooSmall",
    "BackendError",
    "BackendTimeout",
    "ProtocolViolation",
    "BackendExited",
    "ScriptExhausted",
    "__version__",
]
