"""sketcharm: turn 2-D sketch points into arm joint-space drawing
trajectories.

The package estimates the image-to-board and board-to-arm calibrations
three ways (least-squares four-point fit, normalized 4x4 matrix fit,
Levenberg-Marquardt trained regressor), solves forward and inverse
kinematics for a 5-DOF arm and its reduced 3-DOF drawing variant, and
plans per-stroke joint trajectories from rasters or point files.

Front ends: an HTTP service (``sketcharm.service.app``) and a thin CLI
(``sketcharm.cli``) that shares the service's request handlers.
"""

__version__ = "0.1.0"

from .calibration import (
    BoardRegion,
    CalibrationReport,
    CorrespondenceSet,
    ImageBounds,
    MlpCalibrator,
    TrainingConfig,
    as_point_mapper,
    compare_calibrators,
    estimate_four_point,
    estimate_normalized_matrix,
    image_to_board,
    mlp_predict,
    train_mlp_calibrator,
)
from .errors import SketchArmError
from .geometry import (
    AxisErrorStats,
    HomogeneousTransform,
    apply_transform,
    axis_error_stats,
    compose,
    identity,
    pearson_r,
)
from .kinematics import (
    DhRow,
    IkConfig,
    KinematicChain,
    forward_kinematics,
    get_chain,
    link_transform,
    numerical_jacobian,
    solve_ik_closed_3dof,
    solve_ik_iterative,
)
from .pipeline import (
    GrayRaster,
    JointTrajectory,
    SketchPlan,
    evaluate_drawing,
    extract_edge_points,
    order_strokes,
    plan_trajectory,
)

__all__ = [
    "__version__",
    "AxisErrorStats",
    "BoardRegion",
    "CalibrationReport",
    "CorrespondenceSet",
    "DhRow",
    "GrayRaster",
    "HomogeneousTransform",
    "IkConfig",
    "ImageBounds",
    "JointTrajectory",
    "KinematicChain",
    "MlpCalibrator",
    "SketchArmError",
    "SketchPlan",
    "TrainingConfig",
    "apply_transform",
    "as_point_mapper",
    "axis_error_stats",
    "compare_calibrators",
    "compose",
    "estimate_four_point",
    "estimate_normalized_matrix",
    "evaluate_drawing",
    "extract_edge_points",
    "forward_kinematics",
    "get_chain",
    "identity",
    "image_to_board",
    "link_transform",
    "mlp_predict",
    "numerical_jacobian",
    "order_strokes",
    "pearson_r",
    "plan_trajectory",
    "solve_ik_closed_3dof",
    "solve_ik_iterative",
    "train_mlp_calibrator",
]
