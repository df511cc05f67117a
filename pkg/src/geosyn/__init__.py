"""Geodesic-synergy analysis, reconstruction, and retargeting for serial chains."""

from ._backend import backend_name
from .chain import (
    KinematicModel,
    Link,
    PoseTrajectory,
    TaskPose,
    fk_trajectory,
    forward_kinematics,
    geometric_jacobian,
    load_model,
    mass_matrix,
    mass_matrix_derivatives,
)
from .errors import ConvergenceError, ModelError, NumericalError
from .geometry import (
    CallableMetric,
    ChainMetric,
    ConstantMetric,
    GeodesicCurve,
    MetricField,
    angle,
    coriolis_term,
    curve_length,
    energy_profile,
    exp_map,
    exp_map_batch,
    inner_product,
    kinetic_energy,
    log_map,
    parallel_transport,
    riemannian_norm,
    velocity_norms,
)
from .poses import pose_log
from .retarget import (
    RetargetResult,
    ShootResult,
    TaskTarget,
    merge_synergies,
    retarget_motion,
    scale_to_agent,
    shoot_synergy,
)
from .segmentation import (
    JointTrajectory,
    SegmentBoundaryList,
    estimate_velocities,
    segment_riemannian,
    segment_zero_velocity,
)
from .synergy import (
    ReconstructedMotion,
    SynergySegment,
    TemporalProfile,
    ik_track,
    joint_error,
    plan_synergy,
    pose_error,
    reconstruct,
    temporal_profile,
)

__all__ = [
    "backend_name",
    "KinematicModel", "Link", "PoseTrajectory", "TaskPose",
    "fk_trajectory", "forward_kinematics", "geometric_jacobian", "load_model",
    "mass_matrix", "mass_matrix_derivatives",
    "ConvergenceError", "ModelError", "NumericalError",
    "CallableMetric", "ChainMetric", "ConstantMetric", "GeodesicCurve", "MetricField",
    "angle", "coriolis_term", "curve_length", "energy_profile", "exp_map",
    "exp_map_batch", "inner_product", "kinetic_energy", "log_map", "parallel_transport",
    "riemannian_norm", "velocity_norms",
    "pose_log",
    "RetargetResult", "ShootResult", "TaskTarget",
    "merge_synergies", "retarget_motion", "scale_to_agent", "shoot_synergy",
    "JointTrajectory", "SegmentBoundaryList",
    "estimate_velocities", "segment_riemannian", "segment_zero_velocity",
    "ReconstructedMotion", "SynergySegment", "TemporalProfile",
    "ik_track", "joint_error", "plan_synergy", "pose_error", "reconstruct",
    "temporal_profile",
]

__version__ = "0.1.0"
