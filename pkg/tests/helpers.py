"""Shared builders for test chains, metrics, and synthetic motions."""

import numpy as np

from geosyn.chain import load_model
from geosyn.geometry import exp_map, inner_product, riemannian_norm
from geosyn.segmentation import JointTrajectory
from geosyn.synergy import resample_geodesic, temporal_profile


def pendulum_doc(mass=1.0, length=1.0):
    return {
        "name": "pendulum",
        "end_effector": "bob",
        "ee_offset": {"xyz": [length, 0.0, 0.0], "quat": [1.0, 0.0, 0.0, 0.0]},
        "links": [
            {
                "name": "bob",
                "parent": None,
                "axis": [0.0, 0.0, 1.0],
                "origin": {"xyz": [0.0, 0.0, 0.0], "quat": [1.0, 0.0, 0.0, 0.0]},
                "mass": mass,
                "com": [length, 0.0, 0.0],
                "inertia": [0.0] * 9,
            }
        ],
    }


def planar_doc(n_links, lengths=None, masses=None):
    """Planar chain with point masses at the link tips; ee at the last tip."""
    lengths = lengths or [1.0] * n_links
    masses = masses or [1.0] * n_links
    links = []
    for i in range(n_links):
        links.append(
            {
                "name": f"link{i + 1}",
                "parent": None if i == 0 else f"link{i}",
                "axis": [0.0, 0.0, 1.0],
                "origin": {
                    "xyz": [0.0 if i == 0 else lengths[i - 1], 0.0, 0.0],
                    "quat": [1.0, 0.0, 0.0, 0.0],
                },
                "mass": masses[i],
                "com": [lengths[i], 0.0, 0.0],
                "inertia": [0.0] * 9,
            }
        )
    return {
        "name": f"planar{n_links}",
        "end_effector": f"link{n_links}",
        "ee_offset": {"xyz": [lengths[-1], 0.0, 0.0], "quat": [1.0, 0.0, 0.0, 0.0]},
        "links": links,
    }


def two_link_planar():
    return load_model(planar_doc(2))


def three_link_planar():
    return load_model(planar_doc(3, lengths=[0.8, 0.7, 0.5]))


def two_link_oracle(q2):
    """Analytic mass matrix of the unit two-link planar point-mass chain."""
    c = np.cos(q2)
    return np.array([[3.0 + 2.0 * c, 1.0 + c], [1.0 + c, 1.0]])


def random_chain_doc(n, seed):
    rng = np.random.default_rng(seed)
    links = []
    for i in range(n):
        axis = rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        A = rng.normal(size=(3, 3)) * 0.05
        inertia = A @ A.T + 0.01 * np.eye(3)
        links.append(
            {
                "name": f"l{i}",
                "parent": None if i == 0 else f"l{i - 1}",
                "axis": axis.tolist(),
                "origin": {
                    "xyz": (rng.normal(size=3) * 0.15 + np.array([0.25, 0.0, 0.0])).tolist(),
                    "quat": [1.0, 0.0, 0.0, 0.0],
                },
                "mass": float(rng.uniform(0.5, 2.0)),
                "com": (rng.normal(size=3) * 0.1).tolist(),
                "inertia": inertia.flatten().tolist(),
            }
        )
    return {
        "name": f"rand{n}",
        "end_effector": f"l{n - 1}",
        "ee_offset": {"xyz": [0.2, 0.0, 0.0], "quat": [1.0, 0.0, 0.0, 0.0]},
        "links": links,
    }


def random_chain(n, seed):
    return load_model(random_chain_doc(n, seed))


def unit_velocity(metric, q, direction):
    """Scale a direction to unit Riemannian norm at q."""
    return direction / riemannian_norm(metric, q, direction)


def orthonormal_to(metric, q, w, candidate):
    """A unit vector metric-orthogonal to w at q (Gram-Schmidt)."""
    ww = inner_product(metric, q, w, w)
    z = candidate - (inner_product(metric, q, candidate, w) / ww) * w
    return unit_velocity(metric, q, z)


def piecewise_geodesic_motion(metric, q0, seed, n_segments=3, dt=0.01,
                              samples_per_segment=120, jump=0.5,
                              speed_lo=0.6, speed_hi=1.2, steps=400):
    """Synthesize a motion of concatenated geodesics with cubic timing.

    Consecutive segments start in a direction rotated by exactly ``jump``
    radians (Riemannian angle) from the previous segment's terminal direction,
    with matching junction speeds.  Each segment's length is chosen so its
    cubic profile has zero initial acceleration, which keeps junction samples
    exactly consistent with speed chaining.  The sample at each junction
    belongs to the outgoing segment (it carries the new direction).

    Returns (JointTrajectory with analytic velocities, junction sample
    indices, per-segment dicts with the true curve/profile).
    """
    rng = np.random.default_rng(seed)
    n = q0.shape[0]
    q0 = np.asarray(q0, dtype=float)

    q_rows = []
    v_rows = []
    segments = []

    q_cur = q0.copy()
    dir_cur = unit_velocity(metric, q_cur, rng.normal(size=n))
    speed_prev = float(rng.uniform(speed_lo, speed_hi))
    T = samples_per_segment * dt
    for g in range(n_segments):
        speed_end = float(rng.uniform(speed_lo, speed_hi))
        # zero initial acceleration: length = (2 v0 + v1) T / 3
        length = (2.0 * speed_prev + speed_end) * T / 3.0
        profile = temporal_profile(length, T, speed_prev, speed_end)
        assert profile.monotone
        curve = exp_map(metric, q_cur, dir_cur * length, steps=steps)

        offsets = np.arange(samples_per_segment + 1) * dt
        qs, vs = resample_geodesic(curve, length, profile, offsets)
        if g < n_segments - 1:
            q_rows.append(qs[:-1])
            v_rows.append(vs[:-1])
        else:
            q_rows.append(qs)
            v_rows.append(vs)
        segments.append({"curve": curve, "profile": profile, "length": length})

        # next segment: rotate the terminal direction by the jump angle
        q_cur = curve.endpoint
        term_dir = unit_velocity(metric, q_cur, curve.end_velocity)
        ortho = orthonormal_to(metric, q_cur, term_dir, rng.normal(size=n))
        dir_cur = unit_velocity(metric, q_cur, np.cos(jump) * term_dir + np.sin(jump) * ortho)
        speed_prev = speed_end

    traj = JointTrajectory(dt, np.vstack(q_rows), np.vstack(v_rows))
    junctions = [g * samples_per_segment for g in range(1, n_segments)]
    return traj, junctions, segments


def sample_piecewise_motion(segments, segment_duration, times):
    """Evaluate a piecewise-geodesic construction at arbitrary times."""
    times = np.asarray(times, dtype=float)
    n = segments[0]["curve"].q.shape[1]
    q = np.empty((times.shape[0], n))
    v = np.empty((times.shape[0], n))
    for i, tau in enumerate(times):
        g = min(int(tau / segment_duration), len(segments) - 1)
        local = tau - g * segment_duration
        seg = segments[g]
        qs, vs = resample_geodesic(seg["curve"], seg["length"], seg["profile"], [local])
        q[i] = qs[0]
        v[i] = vs[0]
    return q, v
