"""floorref: hand-eye calibration of ground-observing mobile robots with a
laser tracker and a dual-modality referencing plate, plus the repeatability
experiment and cluster metrics used to validate it."""

from . import frames
from ._kernels import BACKEND as KERNEL_BACKEND
from .camera import (
    CameraModel,
    ImagePoint,
    SceneFrame,
    back_project,
    build_rectification_map,
    estimate_plate_pose_from_image,
    project,
)
from .errors import FloorRefError
from .experiment import (
    ClusterReport,
    ExperimentPlan,
    MarkMeasurement,
    cluster_metrics,
    fit_circle,
    measure_mark,
    min_enclosing_circle,
    run_experiment,
)
from .geometry import (
    RigidTransform,
    apply,
    compose,
    invert,
    register_points,
    rotation_distance,
)
from .pipeline import (
    ReferencingResult,
    ReferencingSession,
    TrackerMeasurement,
    compute_rob_h_cam,
    estimate_plate_pose,
    estimate_robot_pose,
    plate_normal,
    reversal_average,
)
from .plate import ReferencingPlate, StereoObservation, measure_plate, nest_to_smr, triangulate_nest
from .simulate import (
    GLASS_NOISE,
    NoiseConfig,
    RobotModel,
    RobotPlacement,
    SimWorld,
    default_placements,
    demo_world,
    inject_wooden_plate,
    random_world,
    simulate_mark_observation,
    simulate_referencing_session,
)

__version__ = "0.1.0"

__all__ = [
    "CameraModel",
    "ClusterReport",
    "ExperimentPlan",
    "FloorRefError",
    "GLASS_NOISE",
    "ImagePoint",
    "KERNEL_BACKEND",
    "MarkMeasurement",
    "NoiseConfig",
    "ReferencingPlate",
    "ReferencingResult",
    "ReferencingSession",
    "RigidTransform",
    "RobotModel",
    "RobotPlacement",
    "SceneFrame",
    "SimWorld",
    "StereoObservation",
    "TrackerMeasurement",
    "apply",
    "back_project",
    "build_rectification_map",
    "cluster_metrics",
    "compose",
    "compute_rob_h_cam",
    "default_placements",
    "demo_world",
    "estimate_plate_pose",
    "estimate_plate_pose_from_image",
    "estimate_robot_pose",
    "fit_circle",
    "frames",
    "inject_wooden_plate",
    "invert",
    "measure_mark",
    "measure_plate",
    "min_enclosing_circle",
    "nest_to_smr",
    "plate_normal",
    "project",
    "random_world",
    "register_points",
    "reversal_average",
    "rotation_distance",
    "run_experiment",
    "simulate_mark_observation",
    "simulate_referencing_session",
    "triangulate_nest",
]
