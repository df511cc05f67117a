"""Riemannian operations on the configuration manifold.

The metric is supplied by a :class:`MetricField`: the kinetic-energy metric
of a chain (``ChainMetric``), a constant matrix (``ConstantMetric``), or any
closed-form test metric (``CallableMetric``).  Chain metrics dispatch to the
compiled kernels; other metrics run through generic numpy integrators that
execute the identical arithmetic.

Conventions: geodesics are integrated over the unit parameter interval with
fixed-step classical RK4, the configuration space is treated as R^n (no angle
wrapping), and metric derivatives use the layout dg[k, i, j] = dg_ij/dq_k.
"""

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .chain import KinematicModel, mass_matrix, mass_matrix_derivatives
from .errors import ConvergenceError, NumericalError


class MetricField:
    """Interface: G(q) and dG/dq at any configuration."""

    dim: int

    def metric(self, q):
        raise NotImplementedError

    def metric_derivatives(self, q):
        raise NotImplementedError

    def metric_and_derivatives(self, q):
        return self.metric(q), self.metric_derivatives(q)


class ChainMetric(MetricField):
    """Kinetic-energy metric of a kinematic chain (the mass-inertia matrix)."""

    def __init__(self, model: KinematicModel):
        self.model = model
        self.dim = model.dof
        self._args = model.kernel_args

    def metric(self, q):
        return mass_matrix(self.model, q)

    def metric_derivatives(self, q):
        return mass_matrix_derivatives(self.model, q)

    def metric_and_derivatives(self, q):
        return _kernels.chain_g_dg(np.asarray(q, dtype=float), *self._args)


class ConstantMetric(MetricField):
    """A configuration-independent SPD metric; the flat special case."""

    def __init__(self, G):
        G = np.asarray(G, dtype=float)
        if G.ndim != 2 or G.shape[0] != G.shape[1]:
            raise ValueError("constant metric must be a square matrix")
        if not np.allclose(G, G.T, atol=1e-12):
            raise ValueError("constant metric must be symmetric")
        if np.linalg.eigvalsh(G).min() <= 0.0:
            raise ValueError("constant metric must be positive definite")
        self._G = G
        self.dim = G.shape[0]
        self._dG = np.zeros((self.dim, self.dim, self.dim))
        self._G.setflags(write=False)
        self._dG.setflags(write=False)

    @staticmethod
    def euclidean(dim):
        return ConstantMetric(np.eye(dim))

    def metric(self, q):
        return self._G

    def metric_derivatives(self, q):
        return self._dG


class CallableMetric(MetricField):
    """Closed-form test metric: G from a callable, dG analytic or by central
    finite differences (step ``fd_step``)."""

    def __init__(self, dim, g_fn, dg_fn=None, fd_step=1e-6):
        self.dim = dim
        self._g_fn = g_fn
        self._dg_fn = dg_fn
        self._h = fd_step

    def metric(self, q):
        return np.asarray(self._g_fn(np.asarray(q, dtype=float)), dtype=float)

    def metric_derivatives(self, q):
        q = np.asarray(q, dtype=float)
        if self._dg_fn is not None:
            return np.asarray(self._dg_fn(q), dtype=float)
        n = self.dim
        dG = np.empty((n, n, n))
        for k in range(n):
            e = np.zeros(n)
            e[k] = self._h
            dG[k] = (self.metric(q + e) - self.metric(q - e)) / (2.0 * self._h)
        return dG


@dataclass
class GeodesicCurve:
    """A sampled curve with velocities over a uniform parameter grid."""

    t: np.ndarray
    q: np.ndarray
    qdot: np.ndarray

    @property
    def spacing(self) -> float:
        return float(self.t[1] - self.t[0])

    @property
    def endpoint(self):
        return self.q[-1]

    @property
    def end_velocity(self):
        return self.qdot[-1]

    @property
    def initial_velocity(self):
        return self.qdot[0]

    def __len__(self):
        return self.q.shape[0]

    def sample(self, u):
        """Cubic-Hermite interpolation of (q, dq/dt) at parameter values u.

        Values outside [t0, t1] are clamped to the ends.
        """
        u = np.atleast_1d(np.asarray(u, dtype=float))
        steps = self.q.shape[0] - 1
        t0, t1 = float(self.t[0]), float(self.t[-1])
        h = (t1 - t0) / steps
        x = np.clip((u - t0) / h, 0.0, float(steps))
        idx = np.minimum(x.astype(int), steps - 1)
        s = x - idx
        h00 = 2 * s**3 - 3 * s**2 + 1
        h10 = s**3 - 2 * s**2 + s
        h01 = -2 * s**3 + 3 * s**2
        h11 = s**3 - s**2
        qa, qb = self.q[idx], self.q[idx + 1]
        va, vb = self.qdot[idx] * h, self.qdot[idx + 1] * h
        qu = (
            h00[:, None] * qa + h10[:, None] * va + h01[:, None] * qb + h11[:, None] * vb
        )
        d00 = 6 * s**2 - 6 * s
        d10 = 3 * s**2 - 4 * s + 1
        d01 = -6 * s**2 + 6 * s
        d11 = 3 * s**2 - 2 * s
        vu = (
            d00[:, None] * qa + d10[:, None] * va + d01[:, None] * qb + d11[:, None] * vb
        ) / h
        return qu, vu


def _as_sampled(curve):
    """Normalize a curve argument to (q, qdot, spacing)."""
    if isinstance(curve, GeodesicCurve):
        return curve.q, curve.qdot, curve.spacing
    if isinstance(curve, tuple) and len(curve) == 3:
        q, qd, h = curve
        return np.asarray(q, dtype=float), np.asarray(qd, dtype=float), float(h)
    # duck-typed: JointTrajectory and friends
    if hasattr(curve, "q") and hasattr(curve, "qdot") and hasattr(curve, "dt"):
        if curve.qdot is None:
            raise ValueError("curve has no velocity samples")
        return curve.q, curve.qdot, float(curve.dt)
    raise TypeError("expected GeodesicCurve, (q, qdot, spacing) tuple, or trajectory")


def _check_vec(metric, v, name):
    v = np.asarray(v, dtype=float).reshape(-1)
    if v.shape[0] != metric.dim:
        raise ValueError(f"{name} has length {v.shape[0]}, metric dimension is {metric.dim}")
    return v


def inner_product(metric, q, u, v) -> float:
    """Riemannian inner product u^T G(q) v."""
    u = _check_vec(metric, u, "u")
    v = _check_vec(metric, v, "v")
    G = metric.metric(q)
    return float(u @ G @ v)


def riemannian_norm(metric, q, v) -> float:
    v = _check_vec(metric, v, "v")
    G = metric.metric(q)
    return float(np.sqrt(max(v @ G @ v, 0.0)))


def angle(metric, q, u, v, floor=1e-12) -> float:
    """Angle in [0, pi] between tangent vectors u, v at q."""
    nu = riemannian_norm(metric, q, u)
    nv = riemannian_norm(metric, q, v)
    if nu < floor or nv < floor:
        raise ValueError("angle undefined for (near-)zero-norm vector")
    c = inner_product(metric, q, u, v) / (nu * nv)
    return float(np.arccos(np.clip(c, -1.0, 1.0)))


def kinetic_energy(metric, q, qdot) -> float:
    qdot = _check_vec(metric, qdot, "qdot")
    G = metric.metric(q)
    return 0.5 * float(qdot @ G @ qdot)


def coriolis_term(metric, q, qdot) -> np.ndarray:
    """c(q, qdot) with c_i = sum_jk Gamma_ijk qd_j qd_k (first-kind symbols)."""
    qdot = _check_vec(metric, qdot, "qdot")
    _, dG = metric.metric_and_derivatives(q)
    return _coriolis_np(dG, qdot)


def _coriolis_np(dG, v):
    gdot_v = np.einsum("kij,k,j->i", dG, v, v)
    grad_quad = np.einsum("ijk,j,k->i", dG, v, v)
    return gdot_v - 0.5 * grad_quad


def _accel_np(metric, q, v):
    G, dG = metric.metric_and_derivatives(q)
    return -np.linalg.solve(G, _coriolis_np(dG, v))


def _geodesic_table_np(metric, q0, v0, steps):
    n = q0.shape[0]
    qs = np.empty((steps + 1, n))
    vs = np.empty((steps + 1, n))
    qs[0], vs[0] = q0, v0
    h = 1.0 / steps
    q, v = q0.copy(), v0.copy()
    for m in range(steps):
        a1 = _accel_np(metric, q, v)
        q2, v2 = q + 0.5 * h * v, v + 0.5 * h * a1
        a2 = _accel_np(metric, q2, v2)
        q3, v3 = q + 0.5 * h * v2, v + 0.5 * h * a2
        a3 = _accel_np(metric, q3, v3)
        q4, v4 = q + h * v3, v + h * a3
        a4 = _accel_np(metric, q4, v4)
        q = q + (h / 6.0) * (v + 2.0 * v2 + 2.0 * v3 + v4)
        v = v + (h / 6.0) * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
        qs[m + 1], vs[m + 1] = q, v
    return qs, vs


def exp_map(metric, q0, v0, steps=1000) -> GeodesicCurve:
    """Geodesic from (q0, v0) over the unit parameter interval.

    The endpoint at parameter 1 is the exponential map of v0 at q0.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    q0 = _check_vec(metric, q0, "q0")
    v0 = _check_vec(metric, v0, "v0")
    if isinstance(metric, ChainMetric):
        qs, vs = _kernels.geodesic_table_chain(q0, v0, steps, *metric._args)
    else:
        qs, vs = _geodesic_table_np(metric, q0, v0, steps)
    if not np.isfinite(qs[-1]).all() or not np.isfinite(vs[-1]).all():
        raise NumericalError("non-finite state during geodesic integration")
    return GeodesicCurve(np.linspace(0.0, 1.0, steps + 1), qs, vs)


def exp_map_batch(metric, q0s, v0s, steps=1000):
    """Endpoints, terminal velocities, and relative kinetic-energy drift for
    a batch of geodesics (rows are independent initial conditions).

    Chain metrics integrate the rows in parallel; the returned drift is
    max_t |k(t) - k(0)| / k(0) along each geodesic.
    """
    q0s = np.atleast_2d(np.asarray(q0s, dtype=float))
    v0s = np.atleast_2d(np.asarray(v0s, dtype=float))
    if q0s.shape != v0s.shape:
        raise ValueError("q0s and v0s must have matching shapes")
    if isinstance(metric, ChainMetric):
        return _kernels.geodesic_batch_chain(q0s, v0s, steps, *metric._args)
    q_end = np.empty_like(q0s)
    v_end = np.empty_like(v0s)
    drift = np.zeros(q0s.shape[0])
    for r in range(q0s.shape[0]):
        curve = exp_map(metric, q0s[r], v0s[r], steps=steps)
        q_end[r] = curve.endpoint
        v_end[r] = curve.end_velocity
        e = energy_profile(metric, curve)
        if e[0] > 0.0:
            drift[r] = float(np.abs(e - e[0]).max() / e[0])
    return q_end, v_end, drift


def _endpoints(metric, q0, V, steps):
    if isinstance(metric, ChainMetric):
        q0s = np.repeat(q0[None, :], V.shape[0], axis=0)
        q_end, _, _ = _kernels.geodesic_batch_chain(q0s, V, steps, *metric._args)
        return q_end
    out = np.empty_like(V)
    for r in range(V.shape[0]):
        qs, _ = _geodesic_table_np(metric, q0, V[r], steps)
        out[r] = qs[-1]
    return out


def _solve_bvp(metric, q0, q1, steps=1000, tol=1e-6, max_iter=100, fd_step=1e-6):
    """Single shooting for the geodesic boundary value problem.

    Gauss-Newton on the endpoint residual, initialized with the straight
    chart line.  When the endpoint map is too nonlinear for that (strongly
    curved metrics over long distances), the target is bisected along the
    chart and the half-way solution, doubled, warm-starts the full problem.
    """
    q0 = _check_vec(metric, q0, "q0")
    q1 = _check_vec(metric, q1, "q1")
    return _bvp_continuation(metric, q0, q1, q1 - q0, steps, tol, max_iter, fd_step, depth=0)


def _bvp_continuation(metric, q0, q1, v_init, steps, tol, max_iter, fd_step, depth):
    try:
        return _bvp_gauss_newton(metric, q0, q1, v_init, steps, tol, max_iter, fd_step)
    except (ConvergenceError, NumericalError):
        if depth >= 5:
            raise
    q_mid = 0.5 * (q0 + q1)
    v_mid, _ = _bvp_continuation(
        metric, q0, q_mid, 0.5 * v_init, steps, tol, max_iter, fd_step, depth + 1
    )
    return _bvp_continuation(
        metric, q0, q1, 2.0 * v_mid, steps, tol, max_iter, fd_step, depth + 1
    )


def _bvp_gauss_newton(metric, q0, q1, v_init, steps, tol, max_iter, fd_step):
    """One Gauss-Newton shooting solve from the given initial velocity.

    The endpoint sensitivity uses forward differences at a coarser step
    count (this only affects the convergence rate, the residual itself is
    evaluated at the full step count).  Steps that increase the residual are
    damped by 0.5; when even damped steps fail, the normal equations are
    re-solved with growing Levenberg-Marquardt regularization, which handles
    ill-conditioned sensitivities.
    """
    n = q0.shape[0]
    jac_steps = max(64, steps // 16)
    step_cap = max(2.0, 4.0 * float(np.linalg.norm(q1 - q0)))

    v = np.asarray(v_init, dtype=float).copy()
    curve = exp_map(metric, q0, v, steps)
    r = curve.endpoint - q1
    # the solver descends the 2-norm; convergence is judged in the max norm
    res2 = float(np.linalg.norm(r))
    res = float(np.max(np.abs(r)))
    best_res, best_v = res, v.copy()

    def try_step(step):
        nonlocal v, curve, r, res, res2
        norm = float(np.linalg.norm(step))
        if not np.isfinite(norm) or norm == 0.0:
            return False
        if norm > step_cap:
            step = step * (step_cap / norm)
        alpha = 1.0
        for _ in range(30):
            v_try = v + alpha * step
            try:
                curve_try = exp_map(metric, q0, v_try, steps)
            except NumericalError:
                alpha *= 0.5
                continue
            r_try = curve_try.endpoint - q1
            res2_try = float(np.linalg.norm(r_try))
            if res2_try < res2:
                v, curve, r, res2 = v_try, curve_try, r_try, res2_try
                res = float(np.max(np.abs(r)))
                return True
            alpha *= 0.5
        return False

    mu = 0.0
    for _ in range(max_iter):
        if res < tol:
            return v, curve
        V = np.empty((n + 1, n))
        V[0] = v
        for i in range(n):
            V[i + 1] = v
            V[i + 1, i] += fd_step
        ends = _endpoints(metric, q0, V, jac_steps)
        J = (ends[1:] - ends[0]).T / fd_step
        if not np.isfinite(J).all():
            break
        scale = float(np.linalg.norm(J)) or 1.0
        improved = False
        for _ in range(10):
            A = J.T @ J + (mu * scale) ** 2 * np.eye(n)
            try:
                step = np.linalg.solve(A, J.T @ (-r))
            except np.linalg.LinAlgError:
                step = np.linalg.lstsq(J, -r, rcond=None)[0]
            if try_step(step):
                improved = True
                mu = max(mu / 4.0, 0.0) if mu > 1e-10 else 0.0
                break
            mu = max(mu * 10.0, 1e-6)
        if not improved:
            break
        if res < best_res:
            best_res, best_v = res, v.copy()
    if res < tol:
        return v, curve
    raise ConvergenceError(
        f"geodesic boundary value problem did not converge (best residual {best_res:.3e})",
        best_residual=best_res,
        best_value=best_v,
    )


def log_map(metric, q0, q1, steps=1000, tol=1e-6, max_iter=100) -> np.ndarray:
    """Initial velocity whose geodesic reaches q1 at parameter 1."""
    v, _ = _solve_bvp(metric, q0, q1, steps=steps, tol=tol, max_iter=max_iter)
    return v


def _transport_np(metric, qs, vs, h, w0):
    w = w0.copy()
    Ga, dGa = metric.metric_and_derivatives(qs[0])

    def rhs(G, dG, u, wv):
        t1 = np.einsum("kij,j,k->i", dG, u, wv)
        t2 = np.einsum("jik,j,k->i", dG, u, wv)
        t3 = np.einsum("ijk,j,k->i", dG, u, wv)
        return -np.linalg.solve(G, 0.5 * (t1 + t2 - t3))

    for t in range(qs.shape[0] - 1):
        qm = 0.5 * (qs[t] + qs[t + 1])
        um = 0.5 * (vs[t] + vs[t + 1])
        Gm, dGm = metric.metric_and_derivatives(qm)
        Gb, dGb = metric.metric_and_derivatives(qs[t + 1])
        k1 = rhs(Ga, dGa, vs[t], w)
        k2 = rhs(Gm, dGm, um, w + 0.5 * h * k1)
        k3 = rhs(Gm, dGm, um, w + 0.5 * h * k2)
        k4 = rhs(Gb, dGb, vs[t + 1], w + h * k3)
        w = w + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        Ga, dGa = Gb, dGb
    return w


def parallel_transport(metric, curve, v) -> np.ndarray:
    """Parallel-transport v from the start to the end of a sampled curve."""
    qs, vs, h = _as_sampled(curve)
    v = _check_vec(metric, v, "v")
    if isinstance(metric, ChainMetric):
        out = _kernels.transport_chain(qs, vs, h, v, *metric._args)
    else:
        out = _transport_np(metric, qs, vs, h, v)
    if not np.isfinite(out).all():
        raise NumericalError("non-finite state during parallel transport")
    return out


def velocity_norms(metric, curve) -> np.ndarray:
    """Riemannian norm of the curve velocity at every sample."""
    qs, vs, _ = _as_sampled(curve)
    if isinstance(metric, ChainMetric):
        return _kernels.riemannian_norms_chain(qs, vs, *metric._args)
    out = np.empty(qs.shape[0])
    for t in range(qs.shape[0]):
        G = metric.metric(qs[t])
        out[t] = np.sqrt(max(vs[t] @ G @ vs[t], 0.0))
    return out


def curve_length(metric, curve) -> float:
    """Trapezoidal integral of the Riemannian speed along the curve."""
    qs, _, h = _as_sampled(curve)
    norms = velocity_norms(metric, curve)
    return float(np.trapezoid(norms, dx=h))


def energy_profile(metric, curve) -> np.ndarray:
    """Kinetic energy 0.5 |qdot|_q^2 at every sample of the curve."""
    return 0.5 * velocity_norms(metric, curve) ** 2
