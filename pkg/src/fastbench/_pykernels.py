"""Pure-Python/numpy implementation of the hot kernels.

Same call signatures as the compiled ``_ckernels`` module; selected by
:mod:`fastbench.kernels` when the extension is unavailable.

All kinematic quantities are world-aligned. Spatial vectors are stacked
(angular; linear) and taken about the world origin inside the CRBA; the
public Jacobian layout is (linear; angular).
"""
import math

import numpy as np

FIXED, REVOLUTE, PRISMATIC = 0, 1, 2

QP_OPTIMAL, QP_INFEASIBLE, QP_MAX_ITER = 0, 1, 2

BACKEND = "python"


def _cross(a, b):
    return np.array(
        [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
    )


def _axis_rotation(u, angle):
    # Rodrigues with a unit axis
    c, s = math.cos(angle), math.sin(angle)
    x, y, z = u
    C = 1.0 - c
    return np.array(
        [
            [c + x * x * C, x * y * C - z * s, x * z * C + y * s],
            [y * x * C + z * s, c + y * y * C, y * z * C - x * s],
            [z * x * C - y * s, z * y * C + x * s, c + z * z * C],
        ]
    )


def placements(tree, q):
    """World rotation (nb, 3, 3) and origin (nb, 3) of every body."""
    nb = tree.nb
    R = np.empty((nb, 3, 3))
    p = np.empty((nb, 3))
    eye = np.eye(3)
    zero = np.zeros(3)
    for i in range(nb):
        par = tree.parent[i]
        Rp, pp = (eye, zero) if par < 0 else (R[par], p[par])
        Rj = Rp @ tree.xrot[i]
        oj = pp + Rp @ tree.xpos[i]
        jt = tree.jtype[i]
        if jt == REVOLUTE:
            R[i] = Rj @ _axis_rotation(tree.axis[i], q[tree.qidx[i]])
            p[i] = oj
        elif jt == PRISMATIC:
            R[i] = Rj
            p[i] = oj + (Rj @ tree.axis[i]) * q[tree.qidx[i]]
        else:
            R[i] = Rj
            p[i] = oj
    return R, p


def _motion(tree, R, p, v, a, g):
    """Forward recursion: world angular velocity/acceleration and origin
    velocity/classical acceleration of each body. Root acceleration is -g."""
    nb = tree.nb
    w = np.zeros((nb, 3))
    vo = np.zeros((nb, 3))
    dw = np.zeros((nb, 3))
    ao = np.zeros((nb, 3))
    z = np.zeros((nb, 3))
    zero = np.zeros(3)
    root_p = zero
    for i in range(nb):
        par = tree.parent[i]
        if par < 0:
            wp, vp, dwp, ap, pp = zero, zero, zero, -g, root_p
        else:
            wp, vp, dwp, ap, pp = w[par], vo[par], dw[par], ao[par], p[par]
        d = p[i] - pp
        wxd = _cross(wp, d)
        wi = wp.copy()
        dwi = dwp.copy()
        vi = vp + wxd
        ai = ap + _cross(dwp, d) + _cross(wp, wxd)
        jt = tree.jtype[i]
        if jt != FIXED:
            zi = R[i] @ tree.axis[i]
            z[i] = zi
            k = tree.qidx[i]
            qd, qdd = v[k], a[k]
            if jt == REVOLUTE:
                wi = wi + zi * qd
                dwi = dwi + zi * qdd + _cross(wp, zi) * qd
            else:
                vi = vi + zi * qd
                ai = ai + zi * qdd + 2.0 * _cross(wp, zi) * qd
        w[i], vo[i], dw[i], ao[i] = wi, vi, dwi, ai
    return w, vo, dw, ao, z


def rnea(tree, q, v, a, gravity):
    """Recursive Newton-Euler inverse dynamics in full coordinates."""
    R, p = placements(tree, q)
    return _rnea(tree, R, p, v, a, np.asarray(gravity, dtype=float))


def _rnea(tree, R, p, v, a, g):
    w, vo, dw, ao, z = _motion(tree, R, p, v, a, g)
    nb = tree.nb
    f = np.zeros((nb, 3))
    n = np.zeros((nb, 3))
    for i in range(nb):
        m = tree.mass[i]
        rc = R[i] @ tree.com[i]
        Iw = R[i] @ tree.inertia[i] @ R[i].T
        ac = ao[i] + _cross(dw[i], rc) + _cross(w[i], _cross(w[i], rc))
        F = m * ac
        f[i] = F
        n[i] = Iw @ dw[i] + _cross(w[i], Iw @ w[i]) + _cross(rc, F)
    tau = np.zeros(tree.nq)
    for i in range(nb - 1, -1, -1):
        jt = tree.jtype[i]
        if jt == REVOLUTE:
            tau[tree.qidx[i]] = z[i] @ n[i]
        elif jt == PRISMATIC:
            tau[tree.qidx[i]] = z[i] @ f[i]
        par = tree.parent[i]
        if par >= 0:
            f[par] += f[i]
            n[par] += n[i] + _cross(p[i] - p[par], f[i])
    return tau


def _skew(c):
    return np.array([[0.0, -c[2], c[1]], [c[2], 0.0, -c[0]], [-c[1], c[0], 0.0]])


def _subspaces(tree, R, p):
    S = np.zeros((tree.nb, 6))
    for i in range(tree.nb):
        jt = tree.jtype[i]
        if jt == FIXED:
            continue
        zi = R[i] @ tree.axis[i]
        if jt == REVOLUTE:
            S[i, :3] = zi
            S[i, 3:] = _cross(p[i], zi)
        else:
            S[i, 3:] = zi
    return S


def crba(tree, q):
    """Composite-rigid-body joint-space mass matrix in full coordinates."""
    R, p = placements(tree, q)
    return _crba(tree, R, p)


def _crba(tree, R, p):
    nb = tree.nb
    Ic = np.zeros((nb, 6, 6))
    for i in range(nb):
        m = tree.mass[i]
        c = p[i] + R[i] @ tree.com[i]
        C = _skew(c)
        Iw = R[i] @ tree.inertia[i] @ R[i].T
        Ic[i, :3, :3] = Iw + m * C @ C.T
        Ic[i, :3, 3:] = m * C
        Ic[i, 3:, :3] = m * C.T
        Ic[i, 3:, 3:] = m * np.eye(3)
    for i in range(nb - 1, -1, -1):
        par = tree.parent[i]
        if par >= 0:
            Ic[par] += Ic[i]
    S = _subspaces(tree, R, p)
    M = np.zeros((tree.nq, tree.nq))
    for i in range(nb):
        if tree.jtype[i] == FIXED:
            continue
        F = Ic[i] @ S[i]
        qi = tree.qidx[i]
        M[qi, qi] = S[i] @ F
        j = tree.parent[i]
        while j >= 0:
            if tree.jtype[j] != FIXED:
                qj = tree.qidx[j]
                M[qi, qj] = M[qj, qi] = S[j] @ F
            j = tree.parent[j]
    return M


def jacobian(tree, q, body):
    """World-aligned 6 x nq Jacobian (linear; angular) of a body origin."""
    R, p = placements(tree, q)
    return _jacobian(tree, R, p, body)


def _jacobian(tree, R, p, body):
    J = np.zeros((6, tree.nq))
    if body < 0:
        return J
    pf = p[body]
    i = body
    while i >= 0:
        jt = tree.jtype[i]
        if jt != FIXED:
            zi = R[i] @ tree.axis[i]
            k = tree.qidx[i]
            if jt == REVOLUTE:
                J[:3, k] = _cross(zi, pf - p[i])
                J[3:, k] = zi
            else:
                J[:3, k] = zi
        i = tree.parent[i]
    return J


def bias_acceleration(tree, q, v, body):
    """``Jdot @ v`` of a body origin: classical linear and angular acceleration
    at zero joint acceleration and zero gravity."""
    R, p = placements(tree, q)
    w, vo, dw, ao, z = _motion(tree, R, p, v, np.zeros(tree.nq), np.zeros(3))
    if body < 0:
        return np.zeros(6)
    return np.concatenate([ao[body], dw[body]])


def dynamics_terms(tree, q, v, body, gravity):
    """Everything one control step needs, from a single placement pass.

    Returns ``(M, bias, J, Jdot_v, R_body, p_body)`` in full coordinates;
    ``bias`` excludes joint damping.
    """
    g = np.asarray(gravity, dtype=float)
    R, p = placements(tree, q)
    M = _crba(tree, R, p)
    bias = _rnea(tree, R, p, v, np.zeros(tree.nq), g)
    J = _jacobian(tree, R, p, body)
    w, vo, dw, ao, z = _motion(tree, R, p, v, np.zeros(tree.nq), np.zeros(3))
    if body < 0:
        return M, bias, J, np.zeros(6), np.eye(3), np.zeros(3)
    return M, bias, J, np.concatenate([ao[body], dw[body]]), R[body].copy(), p[body].copy()


# ---------------------------------------------------------------------------
# dense QP: Goldfarb-Idnani dual active set
#
#   minimize 1/2 x'Hx + g'x  subject to  C x <= d


def _givens(a, b):
    h = math.hypot(a, b)
    if h == 0.0:
        return 1.0, 0.0, 0.0
    return a / h, b / h, h


def solve_qp(H, g, C, d, max_iter=200):
    """Returns ``(x, lam, status, iterations, active)``.

    ``lam`` holds one nonnegative multiplier per row of ``C``. The lowest
    index violated constraint enters the active set first.
    """
    H = np.asarray(H, dtype=float)
    g = np.asarray(g, dtype=float)
    C = np.asarray(C, dtype=float).reshape(-1, len(g))
    d = np.asarray(d, dtype=float)
    n, m = len(g), len(d)
    L = np.linalg.cholesky(H)
    # J @ J.T == inv(H); columns of J get rotated as constraints enter/leave
    J = np.linalg.inv(L).T
    R = np.zeros((n, n))
    x = -(J @ (J.T @ g))
    active: list = []
    u: list = []
    lam = np.zeros(m)
    scale = 1.0 + np.max(np.abs(d), initial=0.0)
    tol = 1e-12 * scale
    it = 0
    while True:
        slack = d - C @ x  # >= 0 when feasible
        p_idx = -1
        for i in range(m):
            if slack[i] < -tol and i not in active:
                p_idx = i
                break
        if p_idx < 0:
            for k, i in enumerate(active):
                lam[i] = u[k]
            return x, lam, QP_OPTIMAL, it, list(active)
        np_ = -C[p_idx]  # ">= 0" convention: np_ @ x + d[p] >= 0
        u_plus = 0.0
        while True:
            it += 1
            if it > max_iter:
                for k, i in enumerate(active):
                    lam[i] = u[k]
                return x, lam, QP_MAX_ITER, it, list(active)
            q = len(active)
            dvec = J.T @ np_
            z = J[:, q:] @ dvec[q:]
            r = np.zeros(q)
            if q:
                r = _solve_upper(R[:q, :q], dvec[:q])
            t1, l_pos = math.inf, -1
            for k in range(q):
                if r[k] > 0.0:
                    ratio = u[k] / r[k]
                    if ratio < t1:
                        t1, l_pos = ratio, k
            zn = z @ np_
            cval = np_ @ x + d[p_idx]
            t2 = -cval / zn if (np.linalg.norm(z) > 1e-14 and zn > 0.0) else math.inf
            t = min(t1, t2)
            if math.isinf(t):
                for k, i in enumerate(active):
                    lam[i] = u[k]
                return x, lam, QP_INFEASIBLE, it, list(active)
            if math.isinf(t2):
                for k in range(q):
                    u[k] -= t * r[k]
                u_plus += t
                _delete(R, J, active, u, l_pos)
                continue
            x = x + t * z
            for k in range(q):
                u[k] -= t * r[k]
            u_plus += t
            if t == t2:
                _add(R, J, dvec, q)
                active.append(p_idx)
                u.append(u_plus)
                break
            _delete(R, J, active, u, l_pos)


def _solve_upper(U, b):
    n = len(b)
    x = np.zeros(n)
    for i in range(n - 1, -1, -1):
        x[i] = (b[i] - U[i, i + 1:] @ x[i + 1:]) / U[i, i]
    return x


def _add(R, J, dvec, q):
    n = len(dvec)
    dvec = dvec.copy()
    for j in range(n - 1, q, -1):
        c, s, h = _givens(dvec[j - 1], dvec[j])
        if h == 0.0:
            continue
        dvec[j - 1], dvec[j] = h, 0.0
        a, b = J[:, j - 1].copy(), J[:, j].copy()
        J[:, j - 1] = c * a + s * b
        J[:, j] = -s * a + c * b
    R[: q + 1, q] = dvec[: q + 1]


def _delete(R, J, active, u, pos):
    q = len(active)
    del active[pos]
    del u[pos]
    for k in range(pos, q - 1):
        R[:, k] = R[:, k + 1]
    R[:, q - 1] = 0.0
    for k in range(pos, q - 1):
        c, s, h = _givens(R[k, k], R[k + 1, k])
        if h == 0.0:
            continue
        rk, rk1 = R[k, k:q - 1].copy(), R[k + 1, k:q - 1].copy()
        R[k, k:q - 1] = c * rk + s * rk1
        R[k + 1, k:q - 1] = -s * rk + c * rk1
        R[k + 1, k] = 0.0
        a, b = J[:, k].copy(), J[:, k + 1].copy()
        J[:, k] = c * a + s * b
        J[:, k + 1] = -s * a + c * b
