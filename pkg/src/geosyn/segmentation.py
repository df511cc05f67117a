"""Velocity estimation and motion segmentation.

Two segmentation methods are provided: the direction-change method, which
parallel-transports each segment's initial velocity along the observed curve
and splits when its angle to the observed velocity exceeds a threshold, and
the classical zero-velocity-crossing baseline.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.signal import savgol_filter

from . import _kernels
from .geometry import ChainMetric, MetricField

VELOCITY_FLOOR = 1e-8


@dataclass
class JointTrajectory:
    """Uniformly sampled joint-space trajectory, optionally with velocities."""

    dt: float
    q: np.ndarray
    qdot: Optional[np.ndarray] = None

    def __post_init__(self):
        self.q = np.atleast_2d(np.asarray(self.q, dtype=float))
        if self.dt <= 0.0:
            raise ValueError("sample period dt must be positive")
        if not np.isfinite(self.q).all():
            raise ValueError("trajectory contains non-finite configurations")
        if self.qdot is not None:
            self.qdot = np.atleast_2d(np.asarray(self.qdot, dtype=float))
            if self.qdot.shape != self.q.shape:
                raise ValueError("velocity samples must match configuration samples in shape")
            if not np.isfinite(self.qdot).all():
                raise ValueError("trajectory contains non-finite velocities")

    @property
    def n_samples(self) -> int:
        return self.q.shape[0]

    @property
    def dof(self) -> int:
        return self.q.shape[1]

    @property
    def duration(self) -> float:
        return (self.n_samples - 1) * self.dt

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_samples) * self.dt

    def with_velocities(self, qdot) -> "JointTrajectory":
        return JointTrajectory(self.dt, self.q, qdot)


@dataclass(frozen=True)
class SegmentBoundaryList:
    """Consecutive inclusive index spans (t_i, t_f) partitioning [0, T]."""

    spans: tuple

    def __post_init__(self):
        spans = tuple((int(a), int(b)) for a, b in self.spans)
        if not spans:
            raise ValueError("empty segment list")
        if spans[0][0] != 0:
            raise ValueError("first segment must start at sample 0")
        for a, b in spans:
            if b < a:
                raise ValueError(f"empty segment ({a}, {b})")
        for (_, b), (a2, _) in zip(spans, spans[1:]):
            if a2 != b + 1:
                raise ValueError("segments must be consecutive (t_i = previous t_f + 1)")
        object.__setattr__(self, "spans", spans)

    @property
    def last_index(self) -> int:
        return self.spans[-1][1]

    def __iter__(self):
        return iter(self.spans)

    def __len__(self):
        return len(self.spans)

    def __getitem__(self, g):
        return self.spans[g]

    def validate_for(self, trajectory: JointTrajectory):
        if self.last_index != trajectory.n_samples - 1:
            raise ValueError("segment list does not cover the trajectory")

    @staticmethod
    def from_starts(starts, last_index) -> "SegmentBoundaryList":
        """Build spans from an iterable of segment-start sample indices."""
        starts = sorted(set(int(s) for s in starts) | {0})
        starts = [s for s in starts if s <= last_index]
        spans = []
        for g, s in enumerate(starts):
            e = starts[g + 1] - 1 if g + 1 < len(starts) else last_index
            spans.append((s, e))
        return SegmentBoundaryList(tuple(spans))


def estimate_velocities(traj: JointTrajectory, window: int = 21, poly_order: int = 2) -> JointTrajectory:
    """Joint velocities from the analytic derivative of a local least-squares
    polynomial fit (Savitzky-Golay).  Boundary samples come from one-sided
    windows of the same polynomial order.
    """
    if window % 2 == 0:
        raise ValueError("window must be odd")
    if window < poly_order + 1:
        raise ValueError("window must be at least poly_order + 1")
    if traj.n_samples < window:
        raise ValueError(
            f"trajectory has {traj.n_samples} samples, shorter than window {window}"
        )
    qdot = savgol_filter(
        traj.q, window_length=window, polyorder=poly_order, deriv=1, delta=traj.dt,
        axis=0, mode="interp",
    )
    return traj.with_velocities(qdot)


def _require_velocities(traj):
    if traj.qdot is None:
        raise ValueError("trajectory has no velocities; run estimate_velocities first")


def direction_change_angles(metric: MetricField, traj: JointTrajectory,
                            delta_theta: float = 0.1, velocity_floor: float = VELOCITY_FLOOR):
    """Per-sample angle between the transported reference velocity and the
    observed velocity, plus the segment-start flags the scan produced.

    This is the raw signal behind :func:`segment_riemannian`; the angle is
    NaN at samples where the test is skipped (velocity under the floor).
    """
    _require_velocities(traj)
    if traj.n_samples < 2:
        raise ValueError("trajectory too short to segment")
    if not (0.0 < delta_theta < np.pi):
        raise ValueError("delta_theta must lie in (0, pi)")
    if isinstance(metric, ChainMetric):
        angles, starts = _kernels.segment_scan_chain(
            traj.q, traj.qdot, traj.dt, delta_theta, velocity_floor, *metric._args
        )
        return angles, starts.astype(bool)
    return _segment_scan_np(metric, traj.q, traj.qdot, traj.dt, delta_theta, velocity_floor)


def _segment_scan_np(metric, qs, vs, h, delta_theta, floor):
    from .geometry import _transport_np

    m, n = qs.shape
    angles = np.full(m, np.nan)
    starts = np.zeros(m, dtype=bool)
    starts[0] = True
    w = np.zeros(n)
    ref_set = False

    def norm_at(t, vec):
        G = metric.metric(qs[t])
        return float(np.sqrt(max(vec @ G @ vec, 0.0)))

    if norm_at(0, vs[0]) >= floor:
        w = vs[0].copy()
        ref_set = True
        angles[0] = 0.0
    for t in range(1, m):
        if ref_set:
            w = _transport_np(metric, qs[t - 1 : t + 1], vs[t - 1 : t + 1], h, w)
        nv = norm_at(t, vs[t])
        if not ref_set:
            if nv >= floor:
                w = vs[t].copy()
                ref_set = True
                angles[t] = 0.0
            continue
        if nv < floor:
            continue
        nw = norm_at(t, w)
        if nw < floor:
            continue
        G = metric.metric(qs[t])
        ca = float(w @ G @ vs[t]) / (nw * nv)
        ang = float(np.arccos(np.clip(ca, -1.0, 1.0)))
        angles[t] = ang
        if ang > delta_theta:
            if t + 1 < m:
                starts[t + 1] = True
            ref_set = False
    return angles, starts


def segment_riemannian(metric: MetricField, traj: JointTrajectory,
                       delta_theta: float = 0.1,
                       velocity_floor: float = VELOCITY_FLOOR) -> SegmentBoundaryList:
    """Segment a motion wherever the velocity direction stops being conserved.

    The current segment's initial velocity is carried to each new sample by
    incremental parallel transport along the observed trajectory; when its
    angle to the observed velocity exceeds ``delta_theta`` the segment closes
    at that sample and a new one opens at the next.  Samples with velocity
    norm under ``velocity_floor`` never trigger a boundary (the angle is
    undefined there), which keeps motion onsets in one piece.
    """
    _, starts = direction_change_angles(metric, traj, delta_theta, velocity_floor)
    return SegmentBoundaryList.from_starts(np.flatnonzero(starts), traj.n_samples - 1)


def segment_zero_velocity(traj: JointTrajectory, crossing_count: int = 3,
                          window: float = 0.05) -> SegmentBoundaryList:
    """Zero-velocity-crossing baseline segmentation.

    A new segment starts where strictly more than ``crossing_count`` distinct
    joints change velocity sign within a sliding window of ``window`` seconds;
    triggers within one window length of a boundary collapse into it.
    """
    _require_velocities(traj)
    w_samples = int(round(window / traj.dt))
    if w_samples < 2:
        raise ValueError("window must span at least 2 samples")
    v = traj.qdot
    m = traj.n_samples
    # crossing[t, j]: joint j's velocity changes sign between t-1 and t
    crossing = (v[:-1] * v[1:]) < 0.0

    boundaries = []
    next_allowed = 1
    for t in range(1, m):
        if t < next_allowed or not crossing[t - 1].any():
            continue
        lo = t
        hi = min(t + w_samples, m)  # events at samples [lo, hi)
        joints = crossing[lo - 1 : hi - 1].any(axis=0)
        if int(joints.sum()) > crossing_count:
            boundaries.append(t)
            next_allowed = t + w_samples
    return SegmentBoundaryList.from_starts(boundaries, m - 1)
