"""Benchmark the compiled kernels against the pure-numpy fallback.

Runs the same workloads in two subprocesses, one per backend (selected with
the GEOSYN_NUMBA environment variable), and prints a side-by-side table.

    python benchmarks/compare_backends.py [--quick]
"""

import argparse
import json
import os
import subprocess
import sys

_WORKER = r"""
import json, time
import numpy as np
from geosyn._backend import backend_name
from geosyn.chain import load_model, mass_matrix
from geosyn.geometry import ChainMetric, exp_map, parallel_transport
from geosyn.segmentation import JointTrajectory, segment_riemannian

QUICK = {quick}

def random_chain_doc(n, seed):
    rng = np.random.default_rng(seed)
    links = []
    for i in range(n):
        axis = rng.normal(size=3); axis /= np.linalg.norm(axis)
        A = rng.normal(size=(3, 3)) * 0.05
        inertia = A @ A.T + 0.01 * np.eye(3)
        links.append({{
            "name": f"l{{i}}", "parent": None if i == 0 else f"l{{i-1}}",
            "axis": axis.tolist(),
            "origin": {{"xyz": (rng.normal(size=3) * 0.15 + [0.25, 0, 0]).tolist(),
                        "quat": [1.0, 0.0, 0.0, 0.0]}},
            "mass": float(rng.uniform(0.5, 2.0)),
            "com": (rng.normal(size=3) * 0.1).tolist(),
            "inertia": inertia.flatten().tolist(),
        }})
    return {{"name": f"rand{{n}}", "end_effector": f"l{{n-1}}",
             "ee_offset": {{"xyz": [0.2, 0, 0], "quat": [1, 0, 0, 0]}}, "links": links}}

model = load_model(random_chain_doc(7, 42))
metric = ChainMetric(model)
rng = np.random.default_rng(0)
q0 = rng.uniform(-1, 1, 7)
G0 = metric.metric(q0)
v0 = rng.normal(size=7)
v0 /= np.sqrt(v0 @ G0 @ v0)

def timed(fn, repeat):
    fn()  # warm (JIT compile on the numba backend)
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best

results = {{"backend": backend_name()}}

n_mm = 200 if QUICK else 2000
results["mass_matrix x%d" % n_mm] = timed(
    lambda: [mass_matrix(model, q0) for _ in range(n_mm)], 3)
results["metric+derivatives x%d" % (n_mm // 2)] = timed(
    lambda: [metric.metric_and_derivatives(q0) for _ in range(n_mm // 2)], 3)

steps = 50 if QUICK else 1000
results["exp_map %d steps" % steps] = timed(
    lambda: exp_map(metric, q0, v0, steps=steps), 3)

curve = exp_map(metric, q0, v0, steps=steps)
results["parallel_transport %d samples" % (steps + 1)] = timed(
    lambda: parallel_transport(metric, curve, v0), 3)

traj = JointTrajectory(0.01, curve.q, curve.qdot)
results["segmentation %d samples" % (steps + 1)] = timed(
    lambda: segment_riemannian(metric, traj, 0.1), 3)

print("RESULTS " + json.dumps(results))
"""


def run_backend(enabled: bool, quick: bool) -> dict:
    env = dict(os.environ, GEOSYN_NUMBA="1" if enabled else "0")
    code = _WORKER.format(quick=quick)
    out = subprocess.run(
        [sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True
    )
    for line in out.stdout.splitlines():
        if line.startswith("RESULTS "):
            return json.loads(line[len("RESULTS "):])
    raise RuntimeError(f"worker produced no results:\n{out.stdout}\n{out.stderr}")


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--quick", action="store_true",
                        help="smaller workloads (the numpy path is slow)")
    args = parser.parse_args()

    numba_res = run_backend(True, args.quick)
    numpy_res = run_backend(False, args.quick)
    if numba_res["backend"] == numpy_res["backend"]:
        print("note: numba unavailable, both runs used the numpy fallback")

    keys = [k for k in numba_res if k != "backend"]
    width = max(len(k) for k in keys)
    print(f"\n{'workload (7-dof chain)':<{width}}  {'numba':>12}  {'numpy':>12}  {'speedup':>8}")
    for k in keys:
        a, b = numba_res[k], numpy_res[k]
        print(f"{k:<{width}}  {a * 1e3:>10.2f}ms  {b * 1e3:>10.2f}ms  {b / a:>7.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
