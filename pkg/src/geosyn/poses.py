"""Operations on task-space poses (R^3 x S^3)."""

import numpy as np

from .chain import TaskPose
from . import quaternions


def pose_log(x1: TaskPose, x2: TaskPose) -> np.ndarray:
    """Product-manifold logarithm of x2 at x1 as a 6-vector.

    Entries 0:3 are the position difference in metres; entries 3:6 are the
    rotation vector (radians) of the relative orientation x1^-1 x2, expressed
    in x1's frame.  The quaternion double cover is handled by flipping the
    relative quaternion to the non-negative-scalar hemisphere, so antipodal
    quaternions describe a zero rotation.
    """
    rel = quaternions.multiply(quaternions.conjugate(x1.orientation), x2.orientation)
    return np.concatenate([x2.position - x1.position, quaternions.log_vector(rel)])


def pose_error_vector(current: TaskPose, target: TaskPose) -> np.ndarray:
    """pose_log with the rotation part rotated into the base frame.

    This is the error a base-frame geometric Jacobian expects; its norm
    equals the norm of :func:`pose_log`.
    """
    e = pose_log(current, target)
    e[3:] = current.rotation_matrix() @ e[3:]
    return e


def pose_distance(x1: TaskPose, x2: TaskPose):
    """(position distance, orientation angle) between two poses."""
    e = pose_log(x1, x2)
    return float(np.linalg.norm(e[:3])), float(np.linalg.norm(e[3:]))
