"""Motion transfer onto a different chain via geodesic shooting.

The pipeline extracts key task poses at the (merged) segment boundaries of
the source motion, rescales them for the target's arm length, and solves one
geodesic boundary problem per synergy in the target's configuration manifold:
find the initial velocity whose geodesic endpoint matches the desired pose
under forward kinematics.  The descent direction pulls the task-space error
back through the damped pseudo-inverse Jacobian at the geodesic endpoint and
parallel-transports it to the start; it approximates the true gradient, so a
backtracking line search decides the step size.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .chain import KinematicModel, PoseTrajectory, TaskPose, fk_trajectory, forward_kinematics, geometric_jacobian
from .errors import NumericalError
from .geometry import ChainMetric, GeodesicCurve, curve_length, exp_map, parallel_transport, riemannian_norm
from .poses import pose_distance, pose_error_vector, pose_log  # noqa: F401  (pose_log is public API here)
from .segmentation import JointTrajectory, SegmentBoundaryList, segment_riemannian
from .synergy import _damped_pinv_apply, resample_geodesic, temporal_profile

_LENGTH_FLOOR = 1e-12


@dataclass(frozen=True)
class TaskTarget:
    """Desired boundary poses and duration of one transferred synergy."""

    index: int
    x_start: TaskPose
    x_end: TaskPose
    duration: float


@dataclass
class ShootResult:
    """Outcome of one geodesic shot toward a task pose."""

    v0: np.ndarray
    curve: GeodesicCurve
    residual_pos: float
    residual_rot: float
    iterations: int
    converged: bool


@dataclass
class RetargetResult:
    """Transferred motion plus per-synergy diagnostics."""

    targets: list
    initial_velocities: np.ndarray
    trajectory: JointTrajectory
    poses: PoseTrajectory
    residuals_pos: np.ndarray
    residuals_rot: np.ndarray
    iterations: np.ndarray
    converged: np.ndarray
    segments: list = field(default_factory=list)
    info: dict = field(default_factory=dict)

    @property
    def all_converged(self) -> bool:
        return bool(self.converged.all())


def scale_to_agent(poses, source_arm_length: float, target_arm_length: float,
                   shoulder_frame: TaskPose) -> PoseTrajectory:
    """Rescale task positions about a shoulder frame by the arm-length ratio.

    Positions are expressed in the shoulder frame, multiplied by
    target/source, and mapped back to the base frame; orientations pass
    through unchanged.
    """
    if source_arm_length <= 0.0 or target_arm_length <= 0.0:
        raise ValueError("arm lengths must be positive")
    if not isinstance(poses, PoseTrajectory):
        poses = PoseTrajectory.from_poses(poses)
    ratio = target_arm_length / source_arm_length
    Rs = shoulder_frame.rotation_matrix()
    ts = shoulder_frame.position
    local = (poses.positions - ts) @ Rs  # rows times R = R^T p
    scaled = ts + (ratio * local) @ Rs.T
    return PoseTrajectory(scaled, poses.orientations.copy())


def merge_synergies(boundaries: SegmentBoundaryList, traj: JointTrajectory,
                    min_joint_distance: float) -> SegmentBoundaryList:
    """Merge segments whose joint-space chord is below the threshold.

    Greedy left-to-right: an undersized segment is absorbed into its
    successor (into its predecessor when it is last), and the pass repeats
    until every chord meets the threshold or a single segment remains.
    """
    if min_joint_distance < 0.0:
        raise ValueError("min_joint_distance must be non-negative")
    spans = list(boundaries)

    def chord(span):
        return float(np.linalg.norm(traj.q[span[1]] - traj.q[span[0]]))

    changed = True
    while changed and len(spans) > 1:
        changed = False
        for g, span in enumerate(spans):
            if chord(span) >= min_joint_distance:
                continue
            if g + 1 < len(spans):
                spans[g : g + 2] = [(span[0], spans[g + 1][1])]
            else:
                spans[g - 1 : g + 1] = [(spans[g - 1][0], span[1])]
            changed = True
            break
    return SegmentBoundaryList(tuple(spans))


def arm_length(model: KinematicModel) -> float:
    """Default arm length: the stretched distance from the first joint to
    the tool point."""
    return model.reach()


def solve_ik_pose(model: KinematicModel, pose: TaskPose, q_seed, max_iterations: int = 300,
                  tol_pos: float = 1e-6, tol_rot: float = 1e-6, damping: float = 1e-4,
                  step_limit: float = 0.5):
    """Damped least-squares IK to a single pose; returns the best iterate."""
    q = np.asarray(q_seed, dtype=float).copy()
    best_q = q.copy()
    best_err = np.inf
    for _ in range(max_iterations):
        e = pose_error_vector(forward_kinematics(model, q), pose)
        pos_err = float(np.linalg.norm(e[:3]))
        rot_err = float(np.linalg.norm(e[3:]))
        total = pos_err + rot_err
        if total < best_err:
            best_err = total
            best_q = q.copy()
        if pos_err < tol_pos and rot_err < tol_rot:
            return q
        step = _damped_pinv_apply(geometric_jacobian(model, q), e, damping)
        norm = float(np.linalg.norm(step))
        if norm > step_limit:
            step *= step_limit / norm
        q = q + step
    return best_q


def shoot_synergy(model: KinematicModel, metric: ChainMetric, q0, x_target: TaskPose,
                  steps: int = 1000, tol_pos: float = 1e-3, tol_rot: float = 1e-2,
                  max_iterations: int = 200, orientation_weight: float = 0.1,
                  damping: float = 1e-4, step_limit: float = 1.0) -> ShootResult:
    """Find the initial velocity whose geodesic endpoint reaches x_target.

    Gradient descent on the squared pose distance between the geodesic
    endpoint's forward kinematics and the target, the two residuals combined
    with ``orientation_weight``.  The descent direction is the task error
    pulled back through the damped pseudo-inverse Jacobian at the endpoint
    and parallel-transported back to the start along the current geodesic;
    because its magnitude is approximate, steps are clipped to ``step_limit``
    and accepted through a backtracking line search.  Unreachable targets
    return the best iterate with ``converged=False`` rather than raising.
    """
    q0 = np.asarray(q0, dtype=float)
    n = q0.shape[0]
    w2 = orientation_weight * orientation_weight

    def clip_norm(vec):
        norm = float(np.linalg.norm(vec))
        if norm > step_limit:
            return vec * (step_limit / norm)
        return vec

    def objective(curve):
        end_pose = forward_kinematics(model, curve.endpoint)
        e = pose_error_vector(end_pose, x_target)
        pos = float(np.linalg.norm(e[:3]))
        rot = float(np.linalg.norm(e[3:]))
        return e, pos, rot, pos * pos + w2 * rot * rot

    start_pose = forward_kinematics(model, q0)
    e0 = pose_error_vector(start_pose, x_target)
    pos0 = float(np.linalg.norm(e0[:3]))
    rot0 = float(np.linalg.norm(e0[3:]))
    if pos0 < tol_pos and rot0 < tol_rot:
        curve = exp_map(metric, q0, np.zeros(n), steps=steps)
        return ShootResult(np.zeros(n), curve, pos0, rot0, 0, True)

    # flat-metric initialization: one damped IK step from q0
    v = clip_norm(_damped_pinv_apply(geometric_jacobian(model, q0), e0, damping))
    curve = exp_map(metric, q0, v, steps=steps)
    e, pos, rot, F = objective(curve)

    def line_search(direction):
        nonlocal v, curve, e, pos, rot, F
        alpha = 1.0
        for _ in range(25):
            v_try = v + alpha * direction
            try:
                curve_try = exp_map(metric, q0, v_try, steps=steps)
            except NumericalError:
                alpha *= 0.5
                continue
            e_try, pos_try, rot_try, F_try = objective(curve_try)
            if F_try < F:
                v, curve = v_try, curve_try
                e, pos, rot, F = e_try, pos_try, rot_try, F_try
                return True
            alpha *= 0.5
        return False

    iterations = 0
    converged = pos < tol_pos and rot < tol_rot
    while not converged and iterations < max_iterations:
        q1 = curve.endpoint
        J1 = geometric_jacobian(model, q1)
        pullback = _damped_pinv_apply(J1, 2.0 * e, damping)
        if not np.isfinite(pullback).all():
            raise NumericalError("non-finite gradient during geodesic shooting")
        reverse = GeodesicCurve(curve.t, curve.q[::-1].copy(), -curve.qdot[::-1].copy())
        direction = clip_norm(parallel_transport(metric, reverse, pullback))
        improved = line_search(direction)
        if not improved:
            # near singular postures the pseudo-inverse direction degrades;
            # fall back to the transported steepest-descent direction
            e_w = e.copy()
            e_w[3:] *= w2
            fallback = clip_norm(parallel_transport(metric, reverse, 2.0 * (J1.T @ e_w)))
            improved = line_search(fallback)
        iterations += 1
        if not improved:
            break
        converged = pos < tol_pos and rot < tol_rot
    return ShootResult(v, curve, pos, rot, iterations, bool(converged))


def retarget_motion(source_model: KinematicModel, traj: JointTrajectory,
                    target_model: KinematicModel, *,
                    boundaries: Optional[SegmentBoundaryList] = None,
                    delta_theta: float = 0.1, merge_threshold: float = 0.05,
                    q0: Optional[np.ndarray] = None, steps: int = 1000,
                    tol_pos: float = 1e-3, tol_rot: float = 1e-2,
                    max_iterations: int = 200, orientation_weight: float = 0.1,
                    source_arm_length: Optional[float] = None,
                    target_arm_length: Optional[float] = None,
                    shoulder_frame: Optional[TaskPose] = None) -> RetargetResult:
    """Transfer a segmented source motion onto the target chain.

    Pipeline: segment (or take given boundaries), merge undersized synergies,
    read the source's key poses at the merged boundaries, rescale them by the
    arm-length ratio about the shoulder frame, then shoot one geodesic per
    synergy on the target chain, each starting where the previous one ended.
    Per-synergy timing reuses the source durations with the minimum-squared-
    acceleration profile; boundary speeds are chained and scaled by the
    target/source length ratio of each synergy.  Synergies that fail to
    converge keep their best iterate and the pipeline continues.
    """
    if traj.qdot is None:
        raise ValueError("trajectory has no velocities")
    source_metric = ChainMetric(source_model)
    target_metric = ChainMetric(target_model)

    if boundaries is None:
        boundaries = segment_riemannian(source_metric, traj, delta_theta)
    merged = merge_synergies(boundaries, traj, merge_threshold)

    if shoulder_frame is None:
        shoulder_frame = TaskPose.identity()
    if source_arm_length is None:
        source_arm_length = arm_length(source_model)
    if target_arm_length is None:
        target_arm_length = arm_length(target_model)

    # key poses at merged-segment boundaries, then chained targets
    key_q = [traj.q[span[0]] for span in merged] + [traj.q[merged.last_index]]
    key_poses = fk_trajectory(source_model, np.array(key_q))
    key_poses = scale_to_agent(key_poses, source_arm_length, target_arm_length, shoulder_frame)
    targets = [
        TaskTarget(g + 1, key_poses[g], key_poses[g + 1], (span[1] - span[0]) * traj.dt)
        for g, span in enumerate(merged)
    ]

    if q0 is None:
        q_cur = solve_ik_pose(target_model, key_poses[0], np.zeros(target_model.dof))
    else:
        q_cur = np.asarray(q0, dtype=float).copy()

    n_t = target_model.dof
    G = len(targets)
    v0s = np.zeros((G, n_t))
    res_pos = np.zeros(G)
    res_rot = np.zeros(G)
    iters = np.zeros(G, dtype=int)
    converged = np.zeros(G, dtype=bool)
    q_out = np.empty((traj.n_samples, n_t))
    qd_out = np.zeros((traj.n_samples, n_t))
    segments = []
    v_carry = None

    for g, (target, span) in enumerate(zip(targets, merged)):
        t_i, t_f = span
        if t_f == t_i:
            # degenerate single-sample synergy (possible at zero merge
            # threshold): hold the current configuration
            q_out[t_i] = q_cur
            converged[g] = True
            continue
        shot = shoot_synergy(
            target_model, target_metric, q_cur, target.x_end,
            steps=steps, tol_pos=tol_pos, tol_rot=tol_rot,
            max_iterations=max_iterations, orientation_weight=orientation_weight,
        )
        v0s[g] = shot.v0
        res_pos[g] = shot.residual_pos
        res_rot[g] = shot.residual_rot
        iters[g] = shot.iterations
        converged[g] = shot.converged

        length_target = curve_length(target_metric, shot.curve)
        span_curve = (traj.q[t_i : t_f + 1], traj.qdot[t_i : t_f + 1], traj.dt)
        length_source = curve_length(source_metric, span_curve)
        scale = length_target / length_source if length_source > _LENGTH_FLOOR else 1.0
        v_end_source = riemannian_norm(source_metric, traj.q[t_f], traj.qdot[t_f])
        v_end = v_end_source * scale
        if v_carry is None:
            v_start = riemannian_norm(source_metric, traj.q[t_i], traj.qdot[t_i]) * scale
        else:
            v_start = v_carry
        profile = temporal_profile(length_target, target.duration, v_start, v_end)
        offsets = np.arange(t_f - t_i + 1) * traj.dt
        q_dense, qd_dense = resample_geodesic(shot.curve, length_target, profile, offsets)
        q_out[t_i : t_f + 1] = q_dense
        qd_out[t_i : t_f + 1] = qd_dense
        segments.append(profile)
        v_carry = v_end
        q_cur = shot.curve.endpoint

    out_traj = JointTrajectory(traj.dt, q_out, qd_out)
    achieved = fk_trajectory(target_model, q_out)
    return RetargetResult(
        targets=targets,
        initial_velocities=v0s,
        trajectory=out_traj,
        poses=achieved,
        residuals_pos=res_pos,
        residuals_rot=res_rot,
        iterations=iters,
        converged=converged,
        segments=segments,
        info={
            "merged_spans": list(merged),
            "source_arm_length": source_arm_length,
            "target_arm_length": target_arm_length,
        },
    )
