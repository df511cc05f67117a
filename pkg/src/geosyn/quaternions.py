"""Unit-quaternion helpers (scalar-first convention: q = [w, x, y, z]).

All functions operate on plain numpy arrays.  Rotations follow the active
convention: ``to_rotation_matrix(q) @ v`` rotates ``v``.
"""

import numpy as np


def normalize(q, hemisphere=True):
    """Return q scaled to unit norm, optionally flipped so that w >= 0."""
    q = np.asarray(q, dtype=float)
    n = np.linalg.norm(q)
    if n == 0.0:
        raise ValueError("zero-norm quaternion")
    q = q / n
    if hemisphere and q[0] < 0.0:
        q = -q
    return q


def multiply(a, b):
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def conjugate(q):
    return np.array([q[0], -q[1], -q[2], -q[3]])


def from_axis_angle(axis, angle):
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    half = 0.5 * angle
    return np.concatenate(([np.cos(half)], np.sin(half) * axis))


def to_rotation_matrix(q):
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def from_rotation_matrix(R):
    """Quaternion of a proper rotation matrix (Shepperd's method)."""
    R = np.asarray(R, dtype=float)
    t = np.trace(R)
    if t > 0.0:
        r = np.sqrt(1.0 + t)
        s = 0.5 / r
        q = np.array(
            [0.5 * r, (R[2, 1] - R[1, 2]) * s, (R[0, 2] - R[2, 0]) * s, (R[1, 0] - R[0, 1]) * s]
        )
    else:
        i = int(np.argmax(np.diag(R)))
        j, k = (i + 1) % 3, (i + 2) % 3
        r = np.sqrt(1.0 + R[i, i] - R[j, j] - R[k, k])
        s = 0.5 / r
        q = np.empty(4)
        q[0] = (R[k, j] - R[j, k]) * s
        q[1 + i] = 0.5 * r
        q[1 + j] = (R[j, i] + R[i, j]) * s
        q[1 + k] = (R[k, i] + R[i, k]) * s
    return normalize(q)


def log_vector(q):
    """Rotation vector (axis times angle, angle in [0, pi]) of a unit quaternion.

    The sign ambiguity of the double cover is resolved by flipping to the
    hemisphere with non-negative scalar part first.
    """
    q = np.asarray(q, dtype=float)
    if q[0] < 0.0:
        q = -q
    vn = np.linalg.norm(q[1:])
    if vn < 1e-15:
        return np.zeros(3)
    angle = 2.0 * np.arctan2(vn, q[0])
    return (angle / vn) * q[1:]


def distance(a, b):
    """Geodesic distance on the rotation group, 2*arccos(|<a, b>|), in [0, pi]."""
    d = abs(float(np.dot(a, b)))
    return 2.0 * np.arccos(min(d, 1.0))
