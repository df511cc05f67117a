"""Serial-chain models: kinematics and the kinetic-energy mass matrix.

A model is an ordered list of links, each driven by one revolute joint, so
the number of links equals the number of degrees of freedom.  Link frames sit
at their joints (origin transform mapping parent frame to joint frame); mass
properties are expressed in the link frame.  An optional fixed tool transform
(``ee_offset``) places the end-effector frame relative to the end-effector
link, which is how a last-link tip is modelled without adding a joint.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from . import _kernels, quaternions
from .errors import ModelError

_UNIT_TOL = 1e-9


@dataclass(frozen=True)
class Link:
    """One revolute joint plus the rigid body it drives."""

    name: str
    parent: int
    axis: np.ndarray
    origin_pos: np.ndarray
    origin_quat: np.ndarray
    mass: float
    com: np.ndarray
    inertia: np.ndarray


@dataclass(frozen=True)
class TaskPose:
    """A pose in R^3 x S^3: position plus unit quaternion (w >= 0)."""

    position: np.ndarray
    orientation: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.position, dtype=float).reshape(3)
        o = np.asarray(self.orientation, dtype=float).reshape(4)
        if abs(np.linalg.norm(o) - 1.0) > _UNIT_TOL:
            raise ValueError("non-unit quaternion in TaskPose")
        o = quaternions.normalize(o)
        object.__setattr__(self, "position", p)
        object.__setattr__(self, "orientation", o)

    @staticmethod
    def identity():
        return TaskPose(np.zeros(3), np.array([1.0, 0.0, 0.0, 0.0]))

    def rotation_matrix(self):
        return quaternions.to_rotation_matrix(self.orientation)


@dataclass
class PoseTrajectory:
    """A sampled sequence of task poses stored as packed arrays."""

    positions: np.ndarray
    orientations: np.ndarray

    def __post_init__(self):
        self.positions = np.atleast_2d(np.asarray(self.positions, dtype=float))
        self.orientations = np.atleast_2d(np.asarray(self.orientations, dtype=float))
        if self.positions.shape[1] != 3 or self.orientations.shape[1] != 4:
            raise ValueError("PoseTrajectory expects (m, 3) positions and (m, 4) quaternions")
        if self.positions.shape[0] != self.orientations.shape[0]:
            raise ValueError("position / orientation sample counts differ")

    def __len__(self):
        return self.positions.shape[0]

    def __getitem__(self, t) -> TaskPose:
        return TaskPose(self.positions[t], self.orientations[t])

    @staticmethod
    def from_poses(poses):
        poses = list(poses)
        return PoseTrajectory(
            np.array([p.position for p in poses]),
            np.array([p.orientation for p in poses]),
        )


@dataclass(frozen=True)
class KinematicModel:
    """A validated serial chain plus the packed arrays used by the kernels."""

    name: str
    links: tuple
    ee_index: int
    ee_offset_pos: np.ndarray
    ee_offset_quat: np.ndarray
    _packed: dict = field(repr=False, default=None)

    @property
    def dof(self) -> int:
        return len(self.links)

    @property
    def kernel_args(self):
        p = self._packed
        return (p["axes"], p["opos"], p["orot"], p["mass"], p["com"], p["inertia"])

    @property
    def ee_offset_rot(self):
        return self._packed["tool_rot"]

    def reach(self) -> float:
        """Stretched length from the first joint to the tool point."""
        total = float(np.linalg.norm(self.ee_offset_pos))
        for link in self.links[1 : self.ee_index + 1]:
            total += float(np.linalg.norm(link.origin_pos))
        return total


def _check_unit(v, what, link_name):
    if abs(np.linalg.norm(v) - 1.0) > _UNIT_TOL:
        raise ModelError(f"link '{link_name}': non-unit {what}")


def _build_model(name, links, ee_index, ee_offset_pos, ee_offset_quat):
    n = len(links)
    packed = {
        "axes": np.array([l.axis for l in links]),
        "opos": np.array([l.origin_pos for l in links]),
        "orot": np.array([quaternions.to_rotation_matrix(l.origin_quat) for l in links]),
        "mass": np.array([l.mass for l in links]),
        "com": np.array([l.com for l in links]),
        "inertia": np.array([l.inertia for l in links]),
        "tool_rot": quaternions.to_rotation_matrix(ee_offset_quat),
    }
    for arr in packed.values():
        arr.setflags(write=False)
    model = KinematicModel(
        name=name,
        links=tuple(links),
        ee_index=ee_index,
        ee_offset_pos=np.asarray(ee_offset_pos, dtype=float),
        ee_offset_quat=np.asarray(ee_offset_quat, dtype=float),
        _packed=packed,
    )
    # reject dynamically degenerate chains up front
    G = _kernels.chain_mass_matrix(np.zeros(n), *model.kernel_args)
    _check_spd(G)
    return model


def load_model(document) -> KinematicModel:
    """Build a validated model from a JSON string or an already-parsed dict.

    Raises ModelError with the offending link's name on any schema or
    invariant violation.
    """
    if isinstance(document, (str, bytes)):
        try:
            doc = json.loads(document)
        except json.JSONDecodeError as exc:
            raise ModelError(f"model document is not valid JSON: {exc}") from exc
    elif isinstance(document, dict):
        doc = document
    else:
        raise ModelError(f"unsupported model document type: {type(document).__name__}")

    for key in ("name", "end_effector", "links"):
        if key not in doc:
            raise ModelError(f"model document missing required field '{key}'")
    raw_links = doc["links"]
    if not isinstance(raw_links, list) or not raw_links:
        raise ModelError("model document needs a non-empty 'links' array")

    links = []
    names = []
    for idx, raw in enumerate(raw_links):
        link_name = raw.get("name")
        if not link_name:
            raise ModelError(f"link #{idx}: missing name")
        if link_name in names:
            raise ModelError(f"link '{link_name}': duplicate name")
        for key in ("parent", "axis", "origin", "mass", "com", "inertia"):
            if key not in raw:
                raise ModelError(f"link '{link_name}': missing field '{key}'")
        parent = raw["parent"]
        if idx == 0:
            if parent is not None:
                raise ModelError(f"link '{link_name}': first link must have parent null")
        elif parent != names[idx - 1]:
            raise ModelError(
                f"link '{link_name}': broken chain (parent must be '{names[idx - 1]}')"
            )

        axis = np.asarray(raw["axis"], dtype=float).reshape(3)
        _check_unit(axis, "joint axis", link_name)
        origin = raw["origin"]
        opos = np.asarray(origin["xyz"], dtype=float).reshape(3)
        oquat = np.asarray(origin["quat"], dtype=float).reshape(4)
        _check_unit(oquat, "origin quaternion", link_name)
        mass = float(raw["mass"])
        if mass < 0.0 or not np.isfinite(mass):
            raise ModelError(f"link '{link_name}': negative or non-finite mass")
        com = np.asarray(raw["com"], dtype=float).reshape(3)
        inertia = np.asarray(raw["inertia"], dtype=float).reshape(3, 3)
        if not np.allclose(inertia, inertia.T, atol=1e-9):
            raise ModelError(f"link '{link_name}': non-symmetric inertia tensor")
        eigs = np.linalg.eigvalsh(0.5 * (inertia + inertia.T))
        if eigs.min() < -1e-9 * max(1.0, eigs.max()):
            raise ModelError(f"link '{link_name}': non-SPD inertia (negative eigenvalue)")
        links.append(
            Link(link_name, idx - 1, axis, opos, quaternions.normalize(oquat), mass, com, inertia)
        )
        names.append(link_name)

    ee_name = doc["end_effector"]
    if ee_name not in names:
        raise ModelError(f"end_effector '{ee_name}' does not name a link")
    ee_index = names.index(ee_name)

    offset = doc.get("ee_offset", {"xyz": [0.0, 0.0, 0.0], "quat": [1.0, 0.0, 0.0, 0.0]})
    off_pos = np.asarray(offset.get("xyz", [0.0, 0.0, 0.0]), dtype=float).reshape(3)
    off_quat = np.asarray(offset.get("quat", [1.0, 0.0, 0.0, 0.0]), dtype=float).reshape(4)
    _check_unit(off_quat, "ee_offset quaternion", ee_name)

    try:
        return _build_model(doc["name"], links, ee_index, off_pos, quaternions.normalize(off_quat))
    except ModelError as exc:
        raise ModelError(f"model '{doc['name']}': {exc}") from exc


def _as_config(model, q):
    q = np.asarray(q, dtype=float).reshape(-1)
    if q.shape[0] != model.dof:
        raise ValueError(f"configuration has {q.shape[0]} entries, model has {model.dof} joints")
    if not np.isfinite(q).all():
        raise ValueError("configuration contains non-finite entries")
    return q


def forward_kinematics(model, q) -> TaskPose:
    """Pose of the end-effector frame in the base frame."""
    q = _as_config(model, q)
    pos, rot = _kernels.chain_fk(
        q, *model.kernel_args[:3], model.ee_index, model.ee_offset_pos, model.ee_offset_rot
    )
    return TaskPose(pos, quaternions.from_rotation_matrix(rot))


def fk_trajectory(model, qs) -> PoseTrajectory:
    """Forward kinematics of every row of a configuration array."""
    qs = np.atleast_2d(np.asarray(qs, dtype=float))
    m = qs.shape[0]
    positions = np.empty((m, 3))
    orientations = np.empty((m, 4))
    for t in range(m):
        pos, rot = _kernels.chain_fk(
            qs[t], *model.kernel_args[:3], model.ee_index, model.ee_offset_pos, model.ee_offset_rot
        )
        positions[t] = pos
        orientations[t] = quaternions.from_rotation_matrix(rot)
    return PoseTrajectory(positions, orientations)


def geometric_jacobian(model, q) -> np.ndarray:
    """6 x n geometric Jacobian (linear rows 0:3, angular rows 3:6)."""
    q = _as_config(model, q)
    return _kernels.chain_jacobian(
        q, *model.kernel_args[:3], model.ee_index, model.ee_offset_pos
    )


def _check_spd(G, floor=1e-12):
    eigs = np.linalg.eigvalsh(0.5 * (G + G.T))
    if eigs.min() <= floor * np.trace(G):
        raise ModelError(
            "mass matrix is not positive definite (degenerate model: "
            f"min eigenvalue {eigs.min():.3e})"
        )


def mass_matrix(model, q) -> np.ndarray:
    """Joint-space mass-inertia matrix G(q), symmetric positive definite."""
    q = _as_config(model, q)
    G = _kernels.chain_mass_matrix(q, *model.kernel_args)
    _check_spd(G)
    return G


def mass_matrix_derivatives(model, q) -> np.ndarray:
    """Configuration derivatives of G: out[k] = dG/dq_k, each slice symmetric."""
    q = _as_config(model, q)
    _, dG = _kernels.chain_g_dg(q, *model.kernel_args)
    return dG
