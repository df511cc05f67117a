"""Hot numeric kernels for serial-chain geometry.

Every function here is compiled with ``@njit`` when the numba backend is
active (see :mod:`geosyn._backend`) and runs as plain Python otherwise, so
the bodies are written loop-style and both paths execute the same arithmetic.
Inner loops avoid temporaries on purpose: the geodesic integrator calls the
metric evaluation four times per RK4 step and allocation cost dominates
otherwise.

Chain data is passed as packed arrays, one row per link:

    axes    (n, 3)     joint axis, link frame, unit norm
    opos    (n, 3)     joint origin translation, parent frame
    orot    (n, 3, 3)  joint origin rotation, parent frame
    mass    (n,)
    com     (n, 3)     centre of mass, link frame
    inertia (n, 3, 3)  rotational inertia about the com, link frame

Screw axes and spatial inertias are expressed about the world origin with
(angular, linear) block ordering.  The metric-derivative layout everywhere is
``dg[k, i, j] = d g_ij / d q_k``.
"""

import numpy as np

from ._backend import njit, prange


@njit
def _mm3_into(A, B, out):
    for r in range(3):
        a0 = A[r, 0]
        a1 = A[r, 1]
        a2 = A[r, 2]
        out[r, 0] = a0 * B[0, 0] + a1 * B[1, 0] + a2 * B[2, 0]
        out[r, 1] = a0 * B[0, 1] + a1 * B[1, 1] + a2 * B[2, 1]
        out[r, 2] = a0 * B[0, 2] + a1 * B[1, 2] + a2 * B[2, 2]


@njit
def _rodrigues_into(axis, angle, out):
    c = np.cos(angle)
    s = np.sin(angle)
    t = 1.0 - c
    x, y, z = axis[0], axis[1], axis[2]
    out[0, 0] = t * x * x + c
    out[0, 1] = t * x * y - s * z
    out[0, 2] = t * x * z + s * y
    out[1, 0] = t * x * y + s * z
    out[1, 1] = t * y * y + c
    out[1, 2] = t * y * z - s * x
    out[2, 0] = t * x * z - s * y
    out[2, 1] = t * y * z + s * x
    out[2, 2] = t * z * z + c


@njit
def _chain_frames(q, axes, opos, orot):
    """World rotation R, joint position p, and world joint axis a per link."""
    n = q.shape[0]
    R = np.empty((n, 3, 3))
    p = np.empty((n, 3))
    a = np.empty((n, 3))
    Rpre = np.empty((3, 3))
    Rj = np.empty((3, 3))
    for i in range(n):
        if i == 0:
            for r in range(3):
                p[0, r] = opos[0, r]
                for c in range(3):
                    Rpre[r, c] = orot[0, r, c]
        else:
            Rp = R[i - 1]
            _mm3_into(Rp, orot[i], Rpre)
            for r in range(3):
                p[i, r] = (
                    p[i - 1, r]
                    + Rp[r, 0] * opos[i, 0]
                    + Rp[r, 1] * opos[i, 1]
                    + Rp[r, 2] * opos[i, 2]
                )
        for r in range(3):
            a[i, r] = Rpre[r, 0] * axes[i, 0] + Rpre[r, 1] * axes[i, 1] + Rpre[r, 2] * axes[i, 2]
        _rodrigues_into(axes[i], q[i], Rj)
        _mm3_into(Rpre, Rj, R[i])
    return R, p, a


@njit
def chain_fk(q, axes, opos, orot, ee_index, tool_pos, tool_rot):
    """End-effector position and rotation: the ee link frame composed with
    the fixed tool transform."""
    R, p, _ = _chain_frames(q, axes, opos, orot)
    Re = np.empty((3, 3))
    _mm3_into(R[ee_index], tool_rot, Re)
    pe = np.empty(3)
    Ree = R[ee_index]
    for r in range(3):
        pe[r] = (
            p[ee_index, r]
            + Ree[r, 0] * tool_pos[0]
            + Ree[r, 1] * tool_pos[1]
            + Ree[r, 2] * tool_pos[2]
        )
    return pe, Re


@njit
def chain_jacobian(q, axes, opos, orot, ee_index, tool_pos):
    """Geometric Jacobian, linear rows 0:3 and angular rows 3:6, base frame."""
    n = q.shape[0]
    R, p, a = _chain_frames(q, axes, opos, orot)
    Ree = R[ee_index]
    pe = np.empty(3)
    for r in range(3):
        pe[r] = (
            p[ee_index, r]
            + Ree[r, 0] * tool_pos[0]
            + Ree[r, 1] * tool_pos[1]
            + Ree[r, 2] * tool_pos[2]
        )
    J = np.zeros((6, n))
    for j in range(ee_index + 1):
        d0 = pe[0] - p[j, 0]
        d1 = pe[1] - p[j, 1]
        d2 = pe[2] - p[j, 2]
        J[0, j] = a[j, 1] * d2 - a[j, 2] * d1
        J[1, j] = a[j, 2] * d0 - a[j, 0] * d2
        J[2, j] = a[j, 0] * d1 - a[j, 1] * d0
        J[3, j] = a[j, 0]
        J[4, j] = a[j, 1]
        J[5, j] = a[j, 2]
    return J


@njit
def _spd_solve_into(G, b, L, y, x):
    """Solve G x = b for SPD G via Cholesky using caller-owned scratch.

    Fills x with NaNs when the factorization breaks down (degenerate metric);
    callers detect this through finiteness checks downstream.
    """
    n = G.shape[0]
    for i in range(n):
        for j in range(i + 1):
            s = G[i, j]
            for k in range(j):
                s -= L[i, k] * L[j, k]
            if i == j:
                if s <= 0.0:
                    for r in range(n):
                        x[r] = np.nan
                    return
                L[i, i] = np.sqrt(s)
            else:
                L[i, j] = s / L[j, j]
    for i in range(n):
        s = b[i]
        for k in range(i):
            s -= L[i, k] * y[k]
        y[i] = s / L[i, i]
    for i in range(n - 1, -1, -1):
        s = y[i]
        for k in range(i + 1, n):
            s -= L[k, i] * x[k]
        x[i] = s / L[i, i]


@njit
def _link_spatial(R, p, a, mass, com, inertia, s, cw, Iw, Ic):
    """Per-link screw axes and spatial inertias about the world origin.

    Ic is filled with the link inertias; the caller turns it into composite
    inertias by suffix summation.
    """
    n = p.shape[0]
    for i in range(n):
        s[i, 0] = a[i, 0]
        s[i, 1] = a[i, 1]
        s[i, 2] = a[i, 2]
        s[i, 3] = p[i, 1] * a[i, 2] - p[i, 2] * a[i, 1]
        s[i, 4] = p[i, 2] * a[i, 0] - p[i, 0] * a[i, 2]
        s[i, 5] = p[i, 0] * a[i, 1] - p[i, 1] * a[i, 0]

        Ri = R[i]
        for r in range(3):
            cw[i, r] = (
                p[i, r] + Ri[r, 0] * com[i, 0] + Ri[r, 1] * com[i, 1] + Ri[r, 2] * com[i, 2]
            )
        # Iw = R I R^T
        for r in range(3):
            t0 = Ri[r, 0] * inertia[i, 0, 0] + Ri[r, 1] * inertia[i, 1, 0] + Ri[r, 2] * inertia[i, 2, 0]
            t1 = Ri[r, 0] * inertia[i, 0, 1] + Ri[r, 1] * inertia[i, 1, 1] + Ri[r, 2] * inertia[i, 2, 1]
            t2 = Ri[r, 0] * inertia[i, 0, 2] + Ri[r, 1] * inertia[i, 1, 2] + Ri[r, 2] * inertia[i, 2, 2]
            for c in range(3):
                Iw[i, r, c] = t0 * Ri[c, 0] + t1 * Ri[c, 1] + t2 * Ri[c, 2]

        m = mass[i]
        c0, c1, c2 = cw[i, 0], cw[i, 1], cw[i, 2]
        cc = c0 * c0 + c1 * c1 + c2 * c2
        for r in range(3):
            for c in range(3):
                Ic[i, r, c] = Iw[i, r, c] - m * cw[i, r] * cw[i, c]
                Ic[i, r, 3 + c] = 0.0
                Ic[i, 3 + r, 3 + c] = 0.0
            Ic[i, r, r] += m * cc
            Ic[i, 3 + r, 3 + r] = m
        Ic[i, 0, 4] = -m * c2
        Ic[i, 0, 5] = m * c1
        Ic[i, 1, 3] = m * c2
        Ic[i, 1, 5] = -m * c0
        Ic[i, 2, 3] = -m * c1
        Ic[i, 2, 4] = m * c0
        for r in range(3):
            for c in range(3):
                Ic[i, 3 + c, r] = Ic[i, r, 3 + c]


@njit
def chain_mass_matrix(q, axes, opos, orot, mass, com, inertia):
    """Joint-space mass-inertia matrix via composite rigid bodies."""
    n = q.shape[0]
    R, p, a = _chain_frames(q, axes, opos, orot)
    s = np.empty((n, 6))
    cw = np.empty((n, 3))
    Iw = np.empty((n, 3, 3))
    Ic = np.empty((n, 6, 6))
    _link_spatial(R, p, a, mass, com, inertia, s, cw, Iw, Ic)
    for j in range(n - 2, -1, -1):
        for r in range(6):
            for c in range(6):
                Ic[j, r, c] += Ic[j + 1, r, c]
    G = np.empty((n, n))
    h = np.empty(6)
    for j in range(n):
        for r in range(6):
            acc = 0.0
            for c in range(6):
                acc += Ic[j, r, c] * s[j, c]
            h[r] = acc
        for i in range(j + 1):
            acc = 0.0
            for r in range(6):
                acc += s[i, r] * h[r]
            G[i, j] = acc
            G[j, i] = acc
    return G


@njit
def chain_g_dg(q, axes, opos, orot, mass, com, inertia):
    """Mass matrix G and its configuration derivatives dg[k,i,j] = dG_ij/dq_k.

    The derivatives propagate world-frame screw axes and composite spatial
    inertias analytically: joint k rotates everything distal to it rigidly
    about its world axis through its joint position.
    """
    n = q.shape[0]
    R, p, a = _chain_frames(q, axes, opos, orot)
    s = np.empty((n, 6))
    cw = np.empty((n, 3))
    Iw = np.empty((n, 3, 3))
    Ic = np.empty((n, 6, 6))
    _link_spatial(R, p, a, mass, com, inertia, s, cw, Iw, Ic)

    # composite-inertia derivative accumulation needs the per-link inertias,
    # so sum them before overwriting Ic with the suffix sums
    dshat = np.zeros((n, n, 6))  # dshat[k, j] = d s_j / d q_k, nonzero for k < j
    for k in range(n):
        ak0, ak1, ak2 = a[k, 0], a[k, 1], a[k, 2]
        for j in range(k + 1, n):
            da0 = ak1 * a[j, 2] - ak2 * a[j, 1]
            da1 = ak2 * a[j, 0] - ak0 * a[j, 2]
            da2 = ak0 * a[j, 1] - ak1 * a[j, 0]
            r0 = p[j, 0] - p[k, 0]
            r1 = p[j, 1] - p[k, 1]
            r2 = p[j, 2] - p[k, 2]
            dp0 = ak1 * r2 - ak2 * r1
            dp1 = ak2 * r0 - ak0 * r2
            dp2 = ak0 * r1 - ak1 * r0
            dshat[k, j, 0] = da0
            dshat[k, j, 1] = da1
            dshat[k, j, 2] = da2
            dshat[k, j, 3] = dp1 * a[j, 2] - dp2 * a[j, 1] + p[j, 1] * da2 - p[j, 2] * da1
            dshat[k, j, 4] = dp2 * a[j, 0] - dp0 * a[j, 2] + p[j, 2] * da0 - p[j, 0] * da2
            dshat[k, j, 5] = dp0 * a[j, 1] - dp1 * a[j, 0] + p[j, 0] * da1 - p[j, 1] * da0

    dIl = np.empty((6, 6))  # one link's spatial-inertia derivative
    dIw = np.empty((3, 3))
    acc = np.empty((6, 6))
    u = np.zeros((n, n, 6))  # u[k, j] = dIc[k, j] s_j + Ic_j dshat[k, j]
    for k in range(n):
        ak0, ak1, ak2 = a[k, 0], a[k, 1], a[k, 2]
        for r in range(6):
            for c in range(6):
                acc[r, c] = 0.0
        for l in range(n - 1, k - 1, -1):
            m = mass[l]
            e0 = cw[l, 0] - p[k, 0]
            e1 = cw[l, 1] - p[k, 1]
            e2 = cw[l, 2] - p[k, 2]
            dc0 = ak1 * e2 - ak2 * e1
            dc1 = ak2 * e0 - ak0 * e2
            dc2 = ak0 * e1 - ak1 * e0
            # d(R I R^T) = [a]x Iw - Iw [a]x
            for c in range(3):
                dIw[0, c] = ak1 * Iw[l, 2, c] - ak2 * Iw[l, 1, c]
                dIw[1, c] = ak2 * Iw[l, 0, c] - ak0 * Iw[l, 2, c]
                dIw[2, c] = ak0 * Iw[l, 1, c] - ak1 * Iw[l, 0, c]
            for r in range(3):
                w0 = dIw[r, 0] - (Iw[l, r, 1] * ak2 - Iw[l, r, 2] * ak1)
                w1 = dIw[r, 1] - (Iw[l, r, 2] * ak0 - Iw[l, r, 0] * ak2)
                w2 = dIw[r, 2] - (Iw[l, r, 0] * ak1 - Iw[l, r, 1] * ak0)
                dIw[r, 0] = w0
                dIw[r, 1] = w1
                dIw[r, 2] = w2
            cd = cw[l, 0] * dc0 + cw[l, 1] * dc1 + cw[l, 2] * dc2
            d0, d1, d2 = dc0, dc1, dc2
            for r in range(3):
                dr = d0 if r == 0 else (d1 if r == 1 else d2)
                for c in range(3):
                    dcc = d0 if c == 0 else (d1 if c == 1 else d2)
                    dIl[r, c] = dIw[r, c] - m * (dr * cw[l, c] + cw[l, r] * dcc)
                    dIl[r, 3 + c] = 0.0
                    dIl[3 + r, 3 + c] = 0.0
                dIl[r, r] += 2.0 * m * cd
            dIl[0, 4] = -m * d2
            dIl[0, 5] = m * d1
            dIl[1, 3] = m * d2
            dIl[1, 5] = -m * d0
            dIl[2, 3] = -m * d1
            dIl[2, 4] = m * d0
            for r in range(3):
                for c in range(3):
                    dIl[3 + c, r] = dIl[r, 3 + c]
            for r in range(6):
                for c in range(6):
                    acc[r, c] += dIl[r, c]
            for r in range(6):
                t = 0.0
                for c in range(6):
                    t += acc[r, c] * s[l, c]
                u[k, l, r] = t
        # joints j <= k share the composite derivative of subtree k,
        # and their own screw axes do not depend on q_k
        for j in range(k):
            for r in range(6):
                t = 0.0
                for c in range(6):
                    t += acc[r, c] * s[j, c]
                u[k, j, r] = t

    # composite inertias (suffix sums) and the mass matrix
    for j in range(n - 2, -1, -1):
        for r in range(6):
            for c in range(6):
                Ic[j, r, c] += Ic[j + 1, r, c]
    hj = np.empty((n, 6))
    G = np.empty((n, n))
    for j in range(n):
        for r in range(6):
            t = 0.0
            for c in range(6):
                t += Ic[j, r, c] * s[j, c]
            hj[j, r] = t
        for i in range(j + 1):
            t = 0.0
            for r in range(6):
                t += s[i, r] * hj[j, r]
            G[i, j] = t
            G[j, i] = t

    # add the Ic_j dshat[k, j] part of u (needs composite Ic, k < j only)
    dG = np.empty((n, n, n))
    for k in range(n):
        for j in range(n):
            if j > k:
                for r in range(6):
                    t = 0.0
                    for c in range(6):
                        t += Ic[j, r, c] * dshat[k, j, c]
                    u[k, j, r] += t
            for i in range(j + 1):
                t = 0.0
                for r in range(6):
                    t += dshat[k, i, r] * hj[j, r] + s[i, r] * u[k, j, r]
                dG[k, i, j] = t
                dG[k, j, i] = t
    return G, dG


@njit
def _coriolis_into(dG, v, c_out):
    """c_i = sum_jk Gamma_ijk v_j v_k with first-kind Christoffel symbols."""
    n = v.shape[0]
    for i in range(n):
        c_out[i] = 0.0
    for k in range(n):
        vk = v[k]
        if vk != 0.0:
            for i in range(n):
                t = 0.0
                for j in range(n):
                    t += dG[k, i, j] * v[j]
                c_out[i] += vk * t
    for i in range(n):
        quad = 0.0
        for j in range(n):
            t = 0.0
            for k in range(n):
                t += dG[i, j, k] * v[k]
            quad += v[j] * t
        c_out[i] -= 0.5 * quad


@njit
def _transport_rhs_into(G, dG, uvec, w, scratch, L, y, out):
    """out = -G^{-1} Gamma[u, w] (the transport ODE right-hand side)."""
    n = uvec.shape[0]
    for i in range(n):
        acc = 0.0
        for j in range(n):
            uj = uvec[j]
            if uj != 0.0:
                for k in range(n):
                    acc += uj * w[k] * (dG[k, i, j] + dG[j, i, k] - dG[i, j, k])
        scratch[i] = -0.5 * acc
    _spd_solve_into(G, scratch, L, y, out)


@njit
def _geo_accel_into(q, v, axes, opos, orot, mass, com, inertia, scratch, L, y, a_out):
    """Geodesic acceleration -G^{-1} c(q, v); returns the kinetic energy at q."""
    n = q.shape[0]
    G, dG = chain_g_dg(q, axes, opos, orot, mass, com, inertia)
    _coriolis_into(dG, v, scratch)
    for i in range(n):
        scratch[i] = -scratch[i]
    _spd_solve_into(G, scratch, L, y, a_out)
    k = 0.0
    for i in range(n):
        for j in range(n):
            k += v[i] * G[i, j] * v[j]
    return 0.5 * k


@njit
def geodesic_table_chain(q0, v0, steps, axes, opos, orot, mass, com, inertia):
    """Integrate the geodesic ODE with fixed-step classical RK4 over [0, 1]."""
    n = q0.shape[0]
    qs = np.empty((steps + 1, n))
    vs = np.empty((steps + 1, n))
    for i in range(n):
        qs[0, i] = q0[i]
        vs[0, i] = v0[i]
    h = 1.0 / steps
    q = q0.copy()
    v = v0.copy()
    q2 = np.empty(n)
    v2 = np.empty(n)
    q3 = np.empty(n)
    v3 = np.empty(n)
    q4 = np.empty(n)
    v4 = np.empty(n)
    a1 = np.empty(n)
    a2 = np.empty(n)
    a3 = np.empty(n)
    a4 = np.empty(n)
    scratch = np.empty(n)
    L = np.zeros((n, n))
    yb = np.empty(n)
    for m in range(steps):
        _geo_accel_into(q, v, axes, opos, orot, mass, com, inertia, scratch, L, yb, a1)
        for i in range(n):
            q2[i] = q[i] + 0.5 * h * v[i]
            v2[i] = v[i] + 0.5 * h * a1[i]
        _geo_accel_into(q2, v2, axes, opos, orot, mass, com, inertia, scratch, L, yb, a2)
        for i in range(n):
            q3[i] = q[i] + 0.5 * h * v2[i]
            v3[i] = v[i] + 0.5 * h * a2[i]
        _geo_accel_into(q3, v3, axes, opos, orot, mass, com, inertia, scratch, L, yb, a3)
        for i in range(n):
            q4[i] = q[i] + h * v3[i]
            v4[i] = v[i] + h * a3[i]
        _geo_accel_into(q4, v4, axes, opos, orot, mass, com, inertia, scratch, L, yb, a4)
        for i in range(n):
            q[i] = q[i] + (h / 6.0) * (v[i] + 2.0 * v2[i] + 2.0 * v3[i] + v4[i])
            v[i] = v[i] + (h / 6.0) * (a1[i] + 2.0 * a2[i] + 2.0 * a3[i] + a4[i])
            qs[m + 1, i] = q[i]
            vs[m + 1, i] = v[i]
    return qs, vs


@njit(parallel=True)
def geodesic_batch_chain(q0s, v0s, steps, axes, opos, orot, mass, com, inertia):
    """Endpoints and relative kinetic-energy drift for a batch of geodesics.

    Rows are independent initial conditions, integrated in parallel.  Drift
    is max_t |k(t) - k(0)| / k(0) over the step-start samples and the final
    state (0 for zero-energy rows).
    """
    rows = q0s.shape[0]
    n = q0s.shape[1]
    q_end = np.empty((rows, n))
    v_end = np.empty((rows, n))
    drift = np.zeros(rows)
    h = 1.0 / steps
    for r in prange(rows):
        q = q0s[r].copy()
        v = v0s[r].copy()
        q2 = np.empty(n)
        v2 = np.empty(n)
        q3 = np.empty(n)
        v3 = np.empty(n)
        q4 = np.empty(n)
        v4 = np.empty(n)
        a1 = np.empty(n)
        a2 = np.empty(n)
        a3 = np.empty(n)
        a4 = np.empty(n)
        scratch = np.empty(n)
        L = np.zeros((n, n))
        yb = np.empty(n)
        k0 = -1.0
        dmax = 0.0
        for m in range(steps):
            k = _geo_accel_into(q, v, axes, opos, orot, mass, com, inertia, scratch, L, yb, a1)
            if m == 0:
                k0 = k
            elif k0 > 0.0:
                d = abs(k - k0) / k0
                if d > dmax:
                    dmax = d
            for i in range(n):
                q2[i] = q[i] + 0.5 * h * v[i]
                v2[i] = v[i] + 0.5 * h * a1[i]
            _geo_accel_into(q2, v2, axes, opos, orot, mass, com, inertia, scratch, L, yb, a2)
            for i in range(n):
                q3[i] = q[i] + 0.5 * h * v2[i]
                v3[i] = v[i] + 0.5 * h * a2[i]
            _geo_accel_into(q3, v3, axes, opos, orot, mass, com, inertia, scratch, L, yb, a3)
            for i in range(n):
                q4[i] = q[i] + h * v3[i]
                v4[i] = v[i] + h * a3[i]
            _geo_accel_into(q4, v4, axes, opos, orot, mass, com, inertia, scratch, L, yb, a4)
            for i in range(n):
                q[i] = q[i] + (h / 6.0) * (v[i] + 2.0 * v2[i] + 2.0 * v3[i] + v4[i])
                v[i] = v[i] + (h / 6.0) * (a1[i] + 2.0 * a2[i] + 2.0 * a3[i] + a4[i])
        G = chain_mass_matrix(q, axes, opos, orot, mass, com, inertia)
        k = 0.0
        for i in range(n):
            for j in range(n):
                k += v[i] * G[i, j] * v[j]
        k *= 0.5
        if k0 > 0.0:
            d = abs(k - k0) / k0
            if d > dmax:
                dmax = d
        drift[r] = dmax
        for i in range(n):
            q_end[r, i] = q[i]
            v_end[r, i] = v[i]
    return q_end, v_end, drift


@njit
def transport_chain(qs, vs, h, w0, axes, opos, orot, mass, com, inertia):
    """Parallel-transport w0 along the sampled curve (qs, vs) with parameter
    spacing h.  One RK4 step per sample interval; the curve state is
    interpolated linearly at stage midpoints."""
    m = qs.shape[0]
    n = qs.shape[1]
    w = w0.copy()
    qm = np.empty(n)
    um = np.empty(n)
    wt = np.empty(n)
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    scratch = np.empty(n)
    L = np.zeros((n, n))
    yb = np.empty(n)
    Ga, dGa = chain_g_dg(qs[0], axes, opos, orot, mass, com, inertia)
    for t in range(m - 1):
        for i in range(n):
            qm[i] = 0.5 * (qs[t, i] + qs[t + 1, i])
            um[i] = 0.5 * (vs[t, i] + vs[t + 1, i])
        Gm, dGm = chain_g_dg(qm, axes, opos, orot, mass, com, inertia)
        Gb, dGb = chain_g_dg(qs[t + 1], axes, opos, orot, mass, com, inertia)
        _transport_rhs_into(Ga, dGa, vs[t], w, scratch, L, yb, k1)
        for i in range(n):
            wt[i] = w[i] + 0.5 * h * k1[i]
        _transport_rhs_into(Gm, dGm, um, wt, scratch, L, yb, k2)
        for i in range(n):
            wt[i] = w[i] + 0.5 * h * k2[i]
        _transport_rhs_into(Gm, dGm, um, wt, scratch, L, yb, k3)
        for i in range(n):
            wt[i] = w[i] + h * k3[i]
        _transport_rhs_into(Gb, dGb, vs[t + 1], wt, scratch, L, yb, k4)
        for i in range(n):
            w[i] = w[i] + (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        Ga, dGa = Gb, dGb
    return w


@njit
def riemannian_norms_chain(qs, vs, axes, opos, orot, mass, com, inertia):
    """Riemannian velocity norms sqrt(v^T G(q) v) at every sample."""
    m = qs.shape[0]
    n = qs.shape[1]
    out = np.empty(m)
    for t in range(m):
        G = chain_mass_matrix(qs[t], axes, opos, orot, mass, com, inertia)
        s = 0.0
        for i in range(n):
            for j in range(n):
                s += vs[t, i] * G[i, j] * vs[t, j]
        out[t] = np.sqrt(max(s, 0.0))
    return out


@njit
def segment_scan_chain(qs, vs, h, delta_theta, floor, axes, opos, orot, mass, com, inertia):
    """Direction-change scan behind the Riemannian segmentation.

    Carries the current segment's reference velocity by incremental parallel
    transport along the observed curve and compares it to the observed
    velocity at each sample.  Returns the per-sample angle (NaN where the
    test is skipped, 0 where the reference is re-armed) and a 0/1 array of
    segment-start samples.
    """
    m = qs.shape[0]
    n = qs.shape[1]
    angles = np.full(m, np.nan)
    starts = np.zeros(m, dtype=np.uint8)
    starts[0] = 1
    w = np.zeros(n)
    ref_set = False
    qm = np.empty(n)
    um = np.empty(n)
    wt = np.empty(n)
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    scratch = np.empty(n)
    L = np.zeros((n, n))
    yb = np.empty(n)

    Ga, dGa = chain_g_dg(qs[0], axes, opos, orot, mass, com, inertia)
    nv = 0.0
    for i in range(n):
        for j in range(n):
            nv += vs[0, i] * Ga[i, j] * vs[0, j]
    nv = np.sqrt(max(nv, 0.0))
    if nv >= floor:
        for i in range(n):
            w[i] = vs[0, i]
        ref_set = True
        angles[0] = 0.0

    for t in range(1, m):
        if ref_set:
            for i in range(n):
                qm[i] = 0.5 * (qs[t - 1, i] + qs[t, i])
                um[i] = 0.5 * (vs[t - 1, i] + vs[t, i])
            Gm, dGm = chain_g_dg(qm, axes, opos, orot, mass, com, inertia)
            Gb, dGb = chain_g_dg(qs[t], axes, opos, orot, mass, com, inertia)
            _transport_rhs_into(Ga, dGa, vs[t - 1], w, scratch, L, yb, k1)
            for i in range(n):
                wt[i] = w[i] + 0.5 * h * k1[i]
            _transport_rhs_into(Gm, dGm, um, wt, scratch, L, yb, k2)
            for i in range(n):
                wt[i] = w[i] + 0.5 * h * k2[i]
            _transport_rhs_into(Gm, dGm, um, wt, scratch, L, yb, k3)
            for i in range(n):
                wt[i] = w[i] + h * k3[i]
            _transport_rhs_into(Gb, dGb, vs[t], wt, scratch, L, yb, k4)
            for i in range(n):
                w[i] = w[i] + (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
            Ga, dGa = Gb, dGb
        else:
            Ga, dGa = chain_g_dg(qs[t], axes, opos, orot, mass, com, inertia)

        nv = 0.0
        for i in range(n):
            for j in range(n):
                nv += vs[t, i] * Ga[i, j] * vs[t, j]
        nv = np.sqrt(max(nv, 0.0))

        if not ref_set:
            if nv >= floor:
                for i in range(n):
                    w[i] = vs[t, i]
                ref_set = True
                angles[t] = 0.0
            continue
        if nv < floor:
            continue
        nw = 0.0
        ip = 0.0
        for i in range(n):
            for j in range(n):
                nw += w[i] * Ga[i, j] * w[j]
                ip += w[i] * Ga[i, j] * vs[t, j]
        nw = np.sqrt(max(nw, 0.0))
        if nw < floor:
            continue
        ca = ip / (nw * nv)
        if ca > 1.0:
            ca = 1.0
        elif ca < -1.0:
            ca = -1.0
        ang = np.arccos(ca)
        angles[t] = ang
        if ang > delta_theta:
            if t + 1 < m:
                starts[t + 1] = 1
            ref_set = False
    return angles, starts
