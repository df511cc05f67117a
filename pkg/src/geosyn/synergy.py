"""Per-segment synergy planning, full-motion reconstruction, and error metrics.

Each segment is planned in two independent parts: the spatial path is the
geodesic between the observed boundary configurations (boundary value problem
solved by shooting), and the timing is the cubic arc-length profile s(t) that
minimizes integrated squared acceleration under the four boundary conditions
s(0) = 0, s(T) = length, sdot(0) and sdot(T) equal to the boundary speeds.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .chain import KinematicModel, PoseTrajectory, fk_trajectory, forward_kinematics, geometric_jacobian
from .errors import ConvergenceError
from .geometry import (
    ChainMetric,
    ConstantMetric,
    MetricField,
    _solve_bvp,
    curve_length,
    riemannian_norm,
)
from .poses import pose_error_vector
from .quaternions import distance as quat_distance
from .segmentation import JointTrajectory, SegmentBoundaryList

_LENGTH_FLOOR = 1e-12


@dataclass(frozen=True)
class TemporalProfile:
    """Cubic arc-length profile s(t) = a0 + a1 t + a2 t^2 + a3 t^3 on [0, T]."""

    coefficients: np.ndarray
    duration: float
    length: float
    monotone: bool

    def s(self, t):
        a0, a1, a2, a3 = self.coefficients
        t = np.asarray(t, dtype=float)
        return a0 + t * (a1 + t * (a2 + t * a3))

    def s_dot(self, t):
        _, a1, a2, a3 = self.coefficients
        t = np.asarray(t, dtype=float)
        return a1 + t * (2.0 * a2 + 3.0 * a3 * t)

    def s_ddot(self, t):
        _, _, a2, a3 = self.coefficients
        return 2.0 * a2 + 6.0 * a3 * np.asarray(t, dtype=float)

    def acceleration_cost(self) -> float:
        """Exact integral of s_ddot(t)^2 over [0, T]."""
        _, _, a2, a3 = self.coefficients
        T = self.duration
        return 4.0 * a2 * a2 * T + 12.0 * a2 * a3 * T * T + 12.0 * a3 * a3 * T**3


def temporal_profile(length: float, duration: float, v_start: float, v_end: float) -> TemporalProfile:
    """Minimum-integrated-squared-acceleration timing along a path of the
    given arc length: the unique cubic satisfying the four boundary
    conditions.  A profile whose speed goes negative anywhere on [0, T] is
    flagged non-monotone, not rejected.
    """
    if duration <= 0.0:
        raise ValueError("duration must be positive")
    if length < 0.0:
        raise ValueError("length must be non-negative")
    T = float(duration)
    a0 = 0.0
    a1 = float(v_start)
    a2 = (3.0 * length - (2.0 * v_start + v_end) * T) / T**2
    a3 = (-2.0 * length + (v_start + v_end) * T) / T**3
    coeffs = np.array([a0, a1, a2, a3])

    # sdot is quadratic: check the endpoints and the interior vertex
    monotone = v_start >= -1e-12 and v_end >= -1e-12
    if abs(a3) > 0.0:
        t_v = -2.0 * a2 / (6.0 * a3)
        if 0.0 < t_v < T:
            monotone = monotone and (a1 + 2.0 * a2 * t_v + 3.0 * a3 * t_v * t_v) >= -1e-12
    elif abs(a2) > 0.0:
        monotone = monotone and min(v_start, v_end) >= -1e-12
    return TemporalProfile(coeffs, T, float(length), bool(monotone))


@dataclass(frozen=True)
class SynergySegment:
    """One planned geodesic synergy."""

    index: int
    t_start: float
    t_end: float
    q_start: np.ndarray
    q_end: np.ndarray
    v_start_norm: float
    v_end_norm: float
    length: float
    profile: TemporalProfile

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start

    @property
    def monotone(self) -> bool:
        return self.profile.monotone


@dataclass
class ReconstructedMotion:
    """A reconstructed or tracked motion with optional task-space poses."""

    tag: str
    trajectory: JointTrajectory
    poses: Optional[PoseTrajectory]
    segments: list
    info: dict = field(default_factory=dict)


def resample_geodesic(curve, length, profile: TemporalProfile, offsets):
    """Sample q(s(t)) and its velocity at the given time offsets into the
    segment.  The geodesic curve is constant-speed in its own parameter, so
    arc length s maps to parameter u = s / length."""
    offsets = np.asarray(offsets, dtype=float)
    if length < _LENGTH_FLOOR:
        q = np.repeat(curve.q[:1], offsets.shape[0], axis=0)
        return q, np.zeros_like(q)
    u = np.clip(profile.s(offsets) / length, 0.0, 1.0)
    qs, dq_du = curve.sample(u)
    qdots = dq_du * (profile.s_dot(offsets) / length)[:, None]
    return qs, qdots


def plan_synergy(metric: MetricField, traj: JointTrajectory, span, index: int = 1,
                 v_start: Optional[float] = None, v_end: Optional[float] = None,
                 steps: int = 1000):
    """Plan one synergy over an inclusive sample span (t_i, t_f).

    Returns (SynergySegment, q_dense, qdot_dense) where the dense arrays
    resample the planned segment at the trajectory's own sample times.
    Boundary speeds default to the observed Riemannian velocity norms at the
    span edges.
    """
    t_i, t_f = int(span[0]), int(span[1])
    if t_f <= t_i:
        raise ValueError("span must contain at least two samples")
    if traj.qdot is None:
        raise ValueError("trajectory has no velocities")
    qi = traj.q[t_i]
    qf = traj.q[t_f]
    if v_start is None:
        v_start = riemannian_norm(metric, qi, traj.qdot[t_i])
    if v_end is None:
        v_end = riemannian_norm(metric, qf, traj.qdot[t_f])
    duration = (t_f - t_i) * traj.dt

    chord = float(np.max(np.abs(qf - qi)))
    if chord < 1e-14:
        curve = None
        length = 0.0
    else:
        v0, curve = _solve_bvp(metric, qi, qf, steps=steps)
        length = curve_length(metric, curve)
    profile = temporal_profile(length, duration, v_start, v_end)
    segment = SynergySegment(
        index=index,
        t_start=t_i * traj.dt,
        t_end=t_f * traj.dt,
        q_start=qi.copy(),
        q_end=qf.copy(),
        v_start_norm=float(v_start),
        v_end_norm=float(v_end),
        length=float(length),
        profile=profile,
    )
    offsets = np.arange(t_f - t_i + 1) * traj.dt
    if curve is None:
        q_dense = np.repeat(qi[None, :], offsets.shape[0], axis=0)
        qd_dense = np.zeros_like(q_dense)
    else:
        q_dense, qd_dense = resample_geodesic(curve, length, profile, offsets)
    return segment, q_dense, qd_dense


def reconstruct(metric: MetricField, traj: JointTrajectory, boundaries: SegmentBoundaryList,
                mode: str = "riemannian", model: Optional[KinematicModel] = None,
                steps: int = 1000) -> ReconstructedMotion:
    """Rebuild a motion as a concatenation of per-segment plans.

    ``riemannian`` plans geodesics under the given metric; ``euclidean``
    replans the same spans under the identity metric, which makes the spatial
    paths straight joint-space lines with Euclidean boundary speeds.  Segment
    boundary speeds are chained (each segment starts at the speed the
    previous one ended with) so the reconstructed speed profile is continuous.
    Task-space poses are filled in when a model is available.
    """
    if mode not in ("riemannian", "euclidean"):
        raise ValueError(f"unknown reconstruction mode '{mode}'")
    if traj.qdot is None:
        raise ValueError("trajectory has no velocities")
    boundaries.validate_for(traj)
    work_metric = metric if mode == "riemannian" else ConstantMetric.euclidean(traj.dof)

    q_out = np.empty_like(traj.q)
    qd_out = np.empty_like(traj.q)
    segments = []
    v_carry = None
    for g, (t_i, t_f) in enumerate(boundaries, start=1):
        if t_f == t_i:
            # degenerate single-sample segment: keep the observed sample
            q_out[t_i] = traj.q[t_i]
            qd_out[t_i] = traj.qdot[t_i]
            v_carry = riemannian_norm(work_metric, traj.q[t_f], traj.qdot[t_f])
            continue
        try:
            segment, q_dense, qd_dense = plan_synergy(
                work_metric, traj, (t_i, t_f), index=g, v_start=v_carry, steps=steps
            )
        except ConvergenceError as exc:
            raise ConvergenceError(
                f"segment {g} (samples {t_i}..{t_f}) failed to plan: {exc}",
                best_residual=exc.best_residual,
            ) from exc
        q_out[t_i : t_f + 1] = q_dense
        qd_out[t_i : t_f + 1] = qd_dense
        segments.append(segment)
        v_carry = segment.v_end_norm

    out_traj = JointTrajectory(traj.dt, q_out, qd_out)
    fk_model = model
    if fk_model is None and isinstance(metric, ChainMetric):
        fk_model = metric.model
    poses = fk_trajectory(fk_model, q_out) if fk_model is not None else None
    return ReconstructedMotion(mode, out_traj, poses, segments)


def _damped_pinv_apply(J, e, damping):
    """Damped least-squares pull-back J^T (J J^T + damping^2 I)^{-1} e."""
    JJt = J @ J.T
    JJt[np.diag_indices_from(JJt)] += damping * damping
    return J.T @ np.linalg.solve(JJt, e)


def ik_track(model: KinematicModel, poses: PoseTrajectory, q0, dt: float,
             k_p: Optional[float] = None, damping: float = 1e-4,
             position_bound: float = 1.0, orientation_bound: float = np.pi) -> ReconstructedMotion:
    """Track a task-space pose sequence with a velocity-level controller.

    Per step the pose error (position difference stacked with the rotation
    vector of the orientation difference, both in the base frame) is pulled
    back through the damped pseudo-inverse Jacobian:
    qdot = J^+ (k_p * error), integrated at dt.  Tracking that exceeds the
    position/orientation bounds sets the ``diverged`` flag; an error that
    never shrinks below 10x the integration scale sets ``saturated``.
    """
    if k_p is None:
        k_p = 1.0 / dt
    m = len(poses)
    q = np.asarray(q0, dtype=float).copy()
    qs = np.empty((m, model.dof))
    qds = np.zeros((m, model.dof))
    qs[0] = q
    max_pos_err = 0.0
    max_rot_err = 0.0
    final_pos_err = 0.0
    for t in range(1, m):
        current = forward_kinematics(model, q)
        e6 = pose_error_vector(current, poses[t])
        pos_err = float(np.linalg.norm(e6[:3]))
        rot_err = float(np.linalg.norm(e6[3:]))
        max_pos_err = max(max_pos_err, pos_err)
        max_rot_err = max(max_rot_err, rot_err)
        J = geometric_jacobian(model, q)
        qdot = _damped_pinv_apply(J, k_p * e6, damping)
        q = q + qdot * dt
        qs[t] = q
        qds[t] = qdot
        final_pos_err = pos_err
    diverged = max_pos_err > position_bound or max_rot_err > orientation_bound
    achieved = fk_trajectory(model, qs)
    final_pos_err = float(np.linalg.norm(achieved.positions[-1] - poses.positions[-1]))
    info = {
        "diverged": bool(diverged),
        "saturated": bool(final_pos_err > 10.0 * dt),
        "max_position_error": max_pos_err,
        "max_orientation_error": max_rot_err,
        "final_position_error": final_pos_err,
    }
    return ReconstructedMotion("ik", JointTrajectory(dt, qs, qds), achieved, [], info)


def joint_error(a, b) -> float:
    """Mean absolute joint-angle deviation over all samples and joints."""
    qa = a.q if isinstance(a, JointTrajectory) else np.asarray(a, dtype=float)
    qb = b.q if isinstance(b, JointTrajectory) else np.asarray(b, dtype=float)
    if qa.shape != qb.shape:
        raise ValueError(f"trajectory shapes differ: {qa.shape} vs {qb.shape}")
    return float(np.mean(np.abs(qa - qb)))


def pose_error(a: PoseTrajectory, b: PoseTrajectory):
    """Mean position distance and mean quaternion geodesic distance."""
    if len(a) != len(b):
        raise ValueError(f"pose sequence lengths differ: {len(a)} vs {len(b)}")
    pos = float(np.mean(np.linalg.norm(a.positions - b.positions, axis=1)))
    rot = float(np.mean([quat_distance(a.orientations[t], b.orientations[t]) for t in range(len(a))]))
    return pos, rot
