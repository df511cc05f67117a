"""Command-line frontend.

Subcommands: ``analyze`` (segmentation reports), ``reconstruct`` (rebuild a
motion under one model), ``retarget`` (transfer a motion to another chain),
and ``compare`` (error table for all three models).  Output files are
delimited tables and JSON documents; plotting is left to external tools.

Exit codes: 0 success, 1 validation or I/O error, 2 numerical failure.
"""

import argparse
import os
import sys

import numpy as np

from . import io
from .chain import fk_trajectory
from .errors import ModelError, NumericalError
from .geometry import ChainMetric
from .retarget import retarget_motion
from .segmentation import (
    direction_change_angles,
    estimate_velocities,
    segment_riemannian,
    segment_zero_velocity,
    SegmentBoundaryList,
)
from .synergy import ik_track, joint_error, pose_error, reconstruct


def _add_common(p, target_model=False, mode=False):
    p.add_argument("--model", required=True, help="chain model JSON file")
    if target_model:
        p.add_argument("--target-model", required=True, help="target chain model JSON file")
    p.add_argument("--trajectory", required=True, help="trajectory CSV file (t,q1,...,qn)")
    p.add_argument("--delta-theta", type=float, default=0.1,
                   help="direction-change threshold in radians (default 0.1)")
    p.add_argument("--sg-window", type=int, default=21,
                   help="velocity-estimation window in samples (default 21)")
    if mode:
        p.add_argument("--mode", choices=("riemannian", "euclidean", "ik"),
                       default="riemannian", help="reconstruction model")
    p.add_argument("--merge-threshold", type=float, default=0.05,
                   help="minimum joint-space chord per synergy in radians (default 0.05)")
    p.add_argument("--steps", type=int, default=1000,
                   help="integration steps per geodesic (default 1000)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0,
                   help="seed for randomized data generation (reserved; the "
                        "analysis commands are deterministic)")


def build_parser():
    parser = argparse.ArgumentParser(prog="geosyn",
                                     description="Geodesic-synergy motion analysis and retargeting")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="segment a motion and emit report tables")
    _add_common(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("reconstruct", help="rebuild a motion under one model")
    _add_common(p, mode=True)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("retarget", help="transfer a motion to a target chain")
    _add_common(p, target_model=True)
    p.set_defaults(func=cmd_retarget)

    p = sub.add_parser("compare", help="error table for riemannian / euclidean / ik models")
    _add_common(p)
    p.set_defaults(func=cmd_compare)
    return parser


def _load_inputs(args):
    model = io.read_model(args.model)
    traj = io.read_trajectory(args.trajectory)
    if traj.dof != model.dof:
        raise ValueError(
            f"trajectory has {traj.dof} joints, model '{model.name}' has {model.dof}"
        )
    traj = estimate_velocities(traj, window=args.sg_window)
    return model, traj


def _spans_payload(boundaries, dt):
    return [
        {"g": g + 1, "t_i": int(a), "t_f": int(b),
         "t_i_s": float(a * dt), "t_f_s": float(b * dt)}
        for g, (a, b) in enumerate(boundaries)
    ]


def _pose_payload(pose):
    return {
        "position": [float(x) for x in pose.position],
        "quaternion": [float(x) for x in pose.orientation],
    }


def cmd_analyze(args) -> int:
    model, traj = _load_inputs(args)
    metric = ChainMetric(model)
    angles, starts = direction_change_angles(metric, traj, args.delta_theta)
    riem = SegmentBoundaryList.from_starts(np.flatnonzero(starts), traj.n_samples - 1)
    zerovel = segment_zero_velocity(traj)

    os.makedirs(args.out, exist_ok=True)
    io.write_json(
        os.path.join(args.out, "segments.json"),
        {
            "model": model.name,
            "delta_theta": args.delta_theta,
            "sg_window": args.sg_window,
            "riemannian": _spans_payload(riem, traj.dt),
            "zero_velocity": _spans_payload(zerovel, traj.dt),
        },
    )
    times = traj.times
    io.write_table(
        os.path.join(args.out, "velocities.csv"),
        ["t"] + [f"qd{i + 1}" for i in range(traj.dof)],
        [[times[t]] + list(traj.qdot[t]) for t in range(traj.n_samples)],
    )
    io.write_table(
        os.path.join(args.out, "angles.csv"),
        ["t", "angle", "segment_start"],
        [[times[t], float(angles[t]), float(starts[t])] for t in range(traj.n_samples)],
    )
    print(f"analyze: {len(riem)} direction-change segments, "
          f"{len(zerovel)} zero-velocity segments -> {args.out}")
    return 0


def _segment_payload(segments):
    return [
        {
            "g": s.index,
            "t_i_s": float(s.t_start),
            "t_f_s": float(s.t_end),
            "length": float(s.length),
            "v_start": float(s.v_start_norm),
            "v_end": float(s.v_end_norm),
            "monotone": bool(s.monotone),
        }
        for s in segments
    ]


def _reconstruct_motion(args, model, traj):
    metric = ChainMetric(model)
    if args.mode == "riemannian":
        boundaries = segment_riemannian(metric, traj, args.delta_theta)
        return reconstruct(metric, traj, boundaries, mode="riemannian", steps=args.steps)
    if args.mode == "euclidean":
        boundaries = segment_zero_velocity(traj)
        return reconstruct(metric, traj, boundaries, mode="euclidean",
                           model=model, steps=args.steps)
    poses = fk_trajectory(model, traj.q)
    return ik_track(model, poses, traj.q[0], traj.dt)


def cmd_reconstruct(args) -> int:
    model, traj = _load_inputs(args)
    motion = _reconstruct_motion(args, model, traj)

    gt_poses = fk_trajectory(model, traj.q)
    err_joint = joint_error(traj, motion.trajectory)
    err_pos, err_rot = pose_error(gt_poses, motion.poses)

    os.makedirs(args.out, exist_ok=True)
    io.write_trajectory(os.path.join(args.out, "reconstruction.csv"), motion.trajectory)
    io.write_json(
        os.path.join(args.out, "metrics.json"),
        {
            "model": model.name,
            "mode": args.mode,
            "joint_error": float(err_joint),
            "pose_error_position": float(err_pos),
            "pose_error_orientation": float(err_rot),
            "segments": _segment_payload(motion.segments),
            "info": {k: (bool(v) if isinstance(v, (bool, np.bool_)) else float(v))
                     for k, v in motion.info.items()},
        },
    )
    times = traj.times
    io.write_table(
        os.path.join(args.out, "joints.csv"),
        ["t"] + [f"gt_q{i + 1}" for i in range(traj.dof)]
              + [f"rec_q{i + 1}" for i in range(traj.dof)],
        [[times[t]] + list(traj.q[t]) + list(motion.trajectory.q[t])
         for t in range(traj.n_samples)],
    )
    io.write_table(
        os.path.join(args.out, "hand.csv"),
        ["t", "gt_x", "gt_y", "gt_z", "gt_qw", "gt_qx", "gt_qy", "gt_qz",
         "rec_x", "rec_y", "rec_z", "rec_qw", "rec_qx", "rec_qy", "rec_qz"],
        [[times[t]] + list(gt_poses.positions[t]) + list(gt_poses.orientations[t])
         + list(motion.poses.positions[t]) + list(motion.poses.orientations[t])
         for t in range(traj.n_samples)],
    )
    print(f"reconstruct[{args.mode}]: joint error {err_joint:.3e} rad, "
          f"hand error {err_pos:.3e} m / {err_rot:.3e} rad -> {args.out}")
    return 0


def cmd_retarget(args) -> int:
    source, traj = _load_inputs(args)
    target = io.read_model(args.target_model)
    result = retarget_motion(
        source, traj, target,
        delta_theta=args.delta_theta,
        merge_threshold=args.merge_threshold,
        steps=args.steps,
    )

    os.makedirs(args.out, exist_ok=True)
    io.write_trajectory(os.path.join(args.out, "target_trajectory.csv"), result.trajectory)
    spans = result.info["merged_spans"]
    synergies = []
    for g, target_g in enumerate(result.targets):
        t_f = spans[g][1]
        synergies.append(
            {
                "g": target_g.index,
                "desired_pose": _pose_payload(target_g.x_end),
                "achieved_pose": _pose_payload(result.poses[t_f]),
                "residual_m": float(result.residuals_pos[g]),
                "residual_rad": float(result.residuals_rot[g]),
                "iterations": int(result.iterations[g]),
                "converged": bool(result.converged[g]),
            }
        )
    io.write_json(
        os.path.join(args.out, "retarget.json"),
        {
            "source_model": source.name,
            "target_model": target.name,
            "merge_threshold": args.merge_threshold,
            "synergies": synergies,
        },
    )
    n_ok = int(result.converged.sum())
    print(f"retarget: {n_ok}/{len(result.targets)} synergies converged -> {args.out}")
    if n_ok == 0:
        print("retarget: no synergy converged", file=sys.stderr)
        return 2
    return 0


def cmd_compare(args) -> int:
    model, traj = _load_inputs(args)
    metric = ChainMetric(model)
    gt_poses = fk_trajectory(model, traj.q)
    motion_name = os.path.splitext(os.path.basename(args.trajectory))[0]

    cells = {}
    failures = {}

    def attempt(name, fn):
        try:
            return fn()
        except Exception as exc:  # per-mode failure -> missing cells
            failures[name] = str(exc)
            return None

    riem = attempt("riemannian", lambda: reconstruct(
        metric, traj, segment_riemannian(metric, traj, args.delta_theta),
        mode="riemannian", steps=args.steps))
    eucl = attempt("euclidean", lambda: reconstruct(
        metric, traj, segment_zero_velocity(traj),
        mode="euclidean", model=model, steps=args.steps))
    ik = attempt("ik", lambda: ik_track(model, gt_poses, traj.q[0], traj.dt))

    if riem is not None:
        cells["joint_riemannian"] = joint_error(traj, riem.trajectory)
        p, r = pose_error(gt_poses, riem.poses)
        cells["pose_riemannian"] = (p, r)
    if eucl is not None:
        cells["joint_euclidean"] = joint_error(traj, eucl.trajectory)
        p, r = pose_error(gt_poses, eucl.poses)
        cells["pose_euclidean"] = (p, r)
    if ik is not None:
        cells["joint_ik"] = joint_error(traj, ik.trajectory)

    if not cells:
        for name, msg in failures.items():
            print(f"compare: {name} failed: {msg}", file=sys.stderr)
        return 2

    def fmt(key):
        if key not in cells:
            return ""
        value = cells[key]
        if isinstance(value, tuple):
            return f"{value[0]:.6g}/{value[1]:.6g}"
        return f"{value:.6g}"

    header = ["motion", "joint_riemannian", "joint_euclidean", "joint_ik",
              "pose_riemannian", "pose_euclidean"]
    row = [motion_name] + [fmt(k) for k in header[1:]]
    os.makedirs(args.out, exist_ok=True)
    io.write_table(os.path.join(args.out, "compare.csv"), header, [row])
    print(",".join(header))
    print(",".join(row))
    for name, msg in failures.items():
        print(f"compare: {name} failed: {msg}", file=sys.stderr)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ModelError, ValueError, OSError) as exc:
        print(f"geosyn: {exc}", file=sys.stderr)
        return 1
    except (NumericalError, np.linalg.LinAlgError) as exc:
        print(f"geosyn: numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
