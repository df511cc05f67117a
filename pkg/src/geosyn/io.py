"""File formats: chain models (JSON), trajectory tables (CSV), result documents.

All writes are atomic (temp file + rename) and all documents carry a
``schema_version`` field; CSV files carry it as a leading ``#`` comment line,
which the readers here skip.
"""

import json
import os
import tempfile

import numpy as np

from .chain import KinematicModel, load_model
from .errors import ModelError
from .segmentation import JointTrajectory

SCHEMA_VERSION = 1
_DT_TOL = 1e-9


def _atomic_write(path, text):
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".geosyn-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(x) -> str:
    return format(float(x), ".17g")


def read_model(path) -> KinematicModel:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ModelError(f"cannot read model file '{path}': {exc}") from exc
    return load_model(text)


def write_model(path, document: dict):
    doc = dict(document)
    doc.setdefault("schema_version", SCHEMA_VERSION)
    _atomic_write(path, json.dumps(doc, indent=2) + "\n")


def read_trajectory(path) -> JointTrajectory:
    """Read a trajectory table: header ``t,q1,...,qn``, one sample per row,
    seconds and radians.  Uniform sampling is enforced within 1e-9 s."""
    with open(path) as fh:
        lines = [ln.strip() for ln in fh]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise ValueError(f"trajectory file '{path}' is empty")
    header = [c.strip() for c in lines[0].split(",")]
    if header[0] != "t" or len(header) < 2:
        raise ValueError(f"trajectory file '{path}': header must be t,q1,...,qn")
    n = len(header) - 1
    rows = []
    for ln in lines[1:]:
        cells = [float(c) for c in ln.split(",")]
        if len(cells) != n + 1:
            raise ValueError(f"trajectory file '{path}': row with {len(cells)} columns, expected {n + 1}")
        rows.append(cells)
    if len(rows) < 2:
        raise ValueError(f"trajectory file '{path}': need at least 2 samples")
    data = np.asarray(rows, dtype=float)
    t = data[:, 0]
    dts = np.diff(t)
    dt = float(dts[0])
    if dt <= 0.0 or np.abs(dts - dt).max() > _DT_TOL:
        raise ValueError(f"trajectory file '{path}': sampling is not uniform within {_DT_TOL} s")
    return JointTrajectory(dt, data[:, 1:])


def write_trajectory(path, traj: JointTrajectory):
    n = traj.dof
    lines = [f"# schema_version: {SCHEMA_VERSION}"]
    lines.append("t," + ",".join(f"q{i + 1}" for i in range(n)))
    for r in range(traj.n_samples):
        cells = [_fmt(r * traj.dt)] + [_fmt(x) for x in traj.q[r]]
        lines.append(",".join(cells))
    _atomic_write(path, "\n".join(lines) + "\n")


def write_table(path, header, rows):
    """Write a plot-ready delimited table with a schema-version comment."""
    lines = [f"# schema_version: {SCHEMA_VERSION}", ",".join(header)]
    for row in rows:
        lines.append(",".join(c if isinstance(c, str) else _fmt(c) for c in row))
    _atomic_write(path, "\n".join(lines) + "\n")


def write_json(path, payload: dict):
    doc = {"schema_version": SCHEMA_VERSION}
    doc.update(payload)
    _atomic_write(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")


def read_json(path) -> dict:
    with open(path) as fh:
        return json.load(fh)
