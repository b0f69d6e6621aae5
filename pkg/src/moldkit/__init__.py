"""moldkit: plan and evaluate shaping actions on depth images.

The toolkit treats a depth image as a point cloud in disguise: the pixel
grid plus luminance encode exactly one 3D point per pixel, bijectively.
Everything else builds on that: a fast weighted-L1 point-cloud distance
computed directly on images, per-action region-of-interest projection,
patch-level effect predictors, a greedy action-sequence planner, and a
synthetic heightmap simulator standing in for a robot working real
material.
"""

from .camera import (
    CameraIntrinsics,
    DepthImage,
    NormalizedImage,
    Point3,
    WeightField,
    D435_CALIBRATED,
    D435_NOMINAL,
    PRESETS,
    backproject,
    build_weight_field,
    denormalize_image,
    depth_to_luminance,
    luminance_to_depth,
    normalize_image,
    normalized_coords,
    pixel_to_point,
    point_to_pixel,
)
from .errors import (
    ConfigError,
    DomainError,
    FrustumError,
    InfeasibleError,
    MoldkitError,
    PreconditionError,
    PredictorUnavailableError,
    RenderError,
    ShapeError,
)
from .metric import (
    DistanceReport,
    chamfer_distance,
    distance,
    matched_mean_distance,
    patch_distance,
    per_pixel_3d_distance,
    viewpoint_consistency_check,
)
from .pgm import read_pgm, write_pgm
from .roi import (
    ActionSpec,
    EffectBox,
    Patch,
    RoiRect,
    extract_patch,
    inject_patch,
    load_actions,
    bundled_actions,
    position_grid,
    project_box,
    project_box_thin,
    valid_position_range,
)

__version__ = "0.1.0"
