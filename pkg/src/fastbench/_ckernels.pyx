# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels; same call signatures and conventions as
:mod:`fastbench._pykernels`, with the per-body loops in typed C."""
import numpy as np

from libc.math cimport cos, fabs, sin, sqrt, hypot, INFINITY

cdef enum:
    FIXED = 0
    REVOLUTE = 1
    PRISMATIC = 2

cdef enum:
    C_OPTIMAL = 0
    C_INFEASIBLE = 1
    C_MAX_ITER = 2

QP_OPTIMAL, QP_INFEASIBLE, QP_MAX_ITER = C_OPTIMAL, C_INFEASIBLE, C_MAX_ITER

BACKEND = "cython"


# ---------------------------------------------------------------------------
# 3-vector and 3x3 helpers (row-major); outputs may not alias inputs


cdef inline double dot3(const double* a, const double* b) noexcept nogil:
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


cdef inline void cross3(const double* a, const double* b, double* out) noexcept nogil:
    out[0] = a[1] * b[2] - a[2] * b[1]
    out[1] = a[2] * b[0] - a[0] * b[2]
    out[2] = a[0] * b[1] - a[1] * b[0]


cdef inline void matvec3(const double* M, const double* x, double* out) noexcept nogil:
    cdef int r
    for r in range(3):
        out[r] = M[3 * r] * x[0] + M[3 * r + 1] * x[1] + M[3 * r + 2] * x[2]


cdef inline void matmul3(const double* A, const double* B, double* out) noexcept nogil:
    cdef int r, c
    for r in range(3):
        for c in range(3):
            out[3 * r + c] = A[3 * r] * B[c] + A[3 * r + 1] * B[3 + c] + A[3 * r + 2] * B[6 + c]


cdef inline void rotate_inertia(const double* R, const double* I, double* out) noexcept nogil:
    # out = R I R'
    cdef double tmp[9]
    cdef int r, c
    matmul3(R, I, tmp)
    for r in range(3):
        for c in range(3):
            out[3 * r + c] = tmp[3 * r] * R[3 * c] + tmp[3 * r + 1] * R[3 * c + 1] + tmp[3 * r + 2] * R[3 * c + 2]


cdef inline void axis_rotation(const double* u, double angle, double* out) noexcept nogil:
    cdef double c = cos(angle), s = sin(angle)
    cdef double C = 1.0 - c
    cdef double x = u[0], y = u[1], z = u[2]
    out[0] = c + x * x * C
    out[1] = x * y * C - z * s
    out[2] = x * z * C + y * s
    out[3] = y * x * C + z * s
    out[4] = c + y * y * C
    out[5] = y * z * C - x * s
    out[6] = z * x * C - y * s
    out[7] = z * y * C + x * s
    out[8] = c + z * z * C


# ---------------------------------------------------------------------------
# tree access


cdef class _Tree:
    cdef int nb, nq
    cdef int[::1] parent, jtype, qidx
    cdef double[:, :, ::1] xrot, inertia
    cdef double[:, ::1] xpos, axis, com
    cdef double[::1] mass

    def __init__(self, tree):
        self.parent = np.ascontiguousarray(tree.parent, dtype=np.int32)
        self.jtype = np.ascontiguousarray(tree.jtype, dtype=np.int32)
        self.qidx = np.ascontiguousarray(tree.qidx, dtype=np.int32)
        self.xrot = np.ascontiguousarray(tree.xrot, dtype=np.float64)
        self.xpos = np.ascontiguousarray(tree.xpos, dtype=np.float64)
        self.axis = np.ascontiguousarray(tree.axis, dtype=np.float64)
        self.mass = np.ascontiguousarray(tree.mass, dtype=np.float64)
        self.com = np.ascontiguousarray(tree.com, dtype=np.float64)
        self.inertia = np.ascontiguousarray(tree.inertia, dtype=np.float64)
        self.nb = self.parent.shape[0]
        self.nq = int(tree.nq)


cdef _Tree _wrap(tree):
    if isinstance(tree, _Tree):
        return tree
    return _Tree(tree)


cdef void _placements(_Tree t, const double* q, double* R, double* p) noexcept nogil:
    cdef int i, k, par
    cdef double Rj[9]
    cdef double Ra[9]
    cdef double off[3]
    cdef double za[3]
    cdef double eye[9]
    cdef double zero[3]
    cdef const double* Rp
    cdef const double* pp
    for k in range(9):
        eye[k] = 0.0
    eye[0] = eye[4] = eye[8] = 1.0
    zero[0] = zero[1] = zero[2] = 0.0
    for i in range(t.nb):
        par = t.parent[i]
        if par < 0:
            Rp, pp = eye, zero
        else:
            Rp, pp = &R[9 * par], &p[3 * par]
        matmul3(Rp, &t.xrot[i, 0, 0], Rj)
        matvec3(Rp, &t.xpos[i, 0], off)
        for k in range(3):
            p[3 * i + k] = pp[k] + off[k]
        if t.jtype[i] == REVOLUTE:
            axis_rotation(&t.axis[i, 0], q[t.qidx[i]], Ra)
            matmul3(Rj, Ra, &R[9 * i])
        else:
            for k in range(9):
                R[9 * i + k] = Rj[k]
            if t.jtype[i] == PRISMATIC:
                matvec3(Rj, &t.axis[i, 0], za)
                for k in range(3):
                    p[3 * i + k] += za[k] * q[t.qidx[i]]


cdef void _motion(_Tree t, const double* R, const double* p, const double* v, const double* a,
                  const double* g, double* w, double* vo, double* dw, double* ao, double* z) noexcept nogil:
    cdef int i, k, par, jt, qi
    cdef double wp[3]
    cdef double vp[3]
    cdef double dwp[3]
    cdef double ap[3]
    cdef double pp[3]
    cdef double d[3]
    cdef double wxd[3]
    cdef double t1[3]
    cdef double t2[3]
    cdef double wz[3]
    cdef double qd, qdd
    for i in range(t.nb):
        par = t.parent[i]
        for k in range(3):
            if par < 0:
                wp[k] = 0.0
                vp[k] = 0.0
                dwp[k] = 0.0
                ap[k] = -g[k]
                pp[k] = 0.0
            else:
                wp[k] = w[3 * par + k]
                vp[k] = vo[3 * par + k]
                dwp[k] = dw[3 * par + k]
                ap[k] = ao[3 * par + k]
                pp[k] = p[3 * par + k]
            d[k] = p[3 * i + k] - pp[k]
        cross3(wp, d, wxd)
        cross3(dwp, d, t1)
        cross3(wp, wxd, t2)
        for k in range(3):
            w[3 * i + k] = wp[k]
            dw[3 * i + k] = dwp[k]
            vo[3 * i + k] = vp[k] + wxd[k]
            ao[3 * i + k] = ap[k] + t1[k] + t2[k]
            z[3 * i + k] = 0.0
        jt = t.jtype[i]
        if jt != FIXED:
            matvec3(&R[9 * i], &t.axis[i, 0], &z[3 * i])
            qi = t.qidx[i]
            qd = v[qi]
            qdd = a[qi]
            cross3(wp, &z[3 * i], wz)
            for k in range(3):
                if jt == REVOLUTE:
                    w[3 * i + k] += z[3 * i + k] * qd
                    dw[3 * i + k] += z[3 * i + k] * qdd + wz[k] * qd
                else:
                    vo[3 * i + k] += z[3 * i + k] * qd
                    ao[3 * i + k] += z[3 * i + k] * qdd + 2.0 * wz[k] * qd


cdef void _rnea(_Tree t, const double* R, const double* p, const double* v, const double* a,
                const double* g, double* w, double* vo, double* dw, double* ao, double* z,
                double* f, double* n, double* tau) noexcept nogil:
    cdef int i, k, par, jt
    cdef double rc[3]
    cdef double Iw[9]
    cdef double ac[3]
    cdef double t1[3]
    cdef double t2[3]
    cdef double t3[3]
    cdef double Iww[3]
    cdef double Idw[3]
    cdef double d[3]
    cdef double m
    _motion(t, R, p, v, a, g, w, vo, dw, ao, z)
    for i in range(t.nb):
        m = t.mass[i]
        matvec3(&R[9 * i], &t.com[i, 0], rc)
        rotate_inertia(&R[9 * i], &t.inertia[i, 0, 0], Iw)
        cross3(&dw[3 * i], rc, t1)
        cross3(&w[3 * i], rc, t2)
        cross3(&w[3 * i], t2, t3)
        for k in range(3):
            ac[k] = ao[3 * i + k] + t1[k] + t3[k]
            f[3 * i + k] = m * ac[k]
        matvec3(Iw, &dw[3 * i], Idw)
        matvec3(Iw, &w[3 * i], Iww)
        cross3(&w[3 * i], Iww, t1)
        cross3(rc, &f[3 * i], t2)
        for k in range(3):
            n[3 * i + k] = Idw[k] + t1[k] + t2[k]
    for k in range(t.nq):
        tau[k] = 0.0
    for i in range(t.nb - 1, -1, -1):
        jt = t.jtype[i]
        if jt == REVOLUTE:
            tau[t.qidx[i]] = dot3(&z[3 * i], &n[3 * i])
        elif jt == PRISMATIC:
            tau[t.qidx[i]] = dot3(&z[3 * i], &f[3 * i])
        par = t.parent[i]
        if par >= 0:
            for k in range(3):
                d[k] = p[3 * i + k] - p[3 * par + k]
            cross3(d, &f[3 * i], t1)
            for k in range(3):
                f[3 * par + k] += f[3 * i + k]
                n[3 * par + k] += n[3 * i + k] + t1[k]


cdef void _crba(_Tree t, const double* R, const double* p, double* Ic, double* S, double* M) noexcept nogil:
    cdef int i, j, k, r, c, par, qi, qj, nq = t.nq
    cdef double m
    cdef double cpos[3]
    cdef double rc[3]
    cdef double Iw[9]
    cdef double Cs[9]
    cdef double CC[9]
    cdef double F[6]
    cdef double zi[3]
    cdef double acc
    cdef double* I6
    for i in range(t.nb):
        m = t.mass[i]
        matvec3(&R[9 * i], &t.com[i, 0], rc)
        for k in range(3):
            cpos[k] = p[3 * i + k] + rc[k]
        # skew(c)
        Cs[0] = 0.0
        Cs[1] = -cpos[2]
        Cs[2] = cpos[1]
        Cs[3] = cpos[2]
        Cs[4] = 0.0
        Cs[5] = -cpos[0]
        Cs[6] = -cpos[1]
        Cs[7] = cpos[0]
        Cs[8] = 0.0
        rotate_inertia(&R[9 * i], &t.inertia[i, 0, 0], Iw)
        # C C'
        for r in range(3):
            for c in range(3):
                CC[3 * r + c] = Cs[3 * r] * Cs[3 * c] + Cs[3 * r + 1] * Cs[3 * c + 1] + Cs[3 * r + 2] * Cs[3 * c + 2]
        I6 = &Ic[36 * i]
        for r in range(3):
            for c in range(3):
                I6[6 * r + c] = Iw[3 * r + c] + m * CC[3 * r + c]
                I6[6 * r + c + 3] = m * Cs[3 * r + c]
                I6[6 * (r + 3) + c] = m * Cs[3 * c + r]
                I6[6 * (r + 3) + c + 3] = m if r == c else 0.0
    for i in range(t.nb - 1, -1, -1):
        par = t.parent[i]
        if par >= 0:
            for k in range(36):
                Ic[36 * par + k] += Ic[36 * i + k]
    for i in range(t.nb):
        for k in range(6):
            S[6 * i + k] = 0.0
        if t.jtype[i] == FIXED:
            continue
        matvec3(&R[9 * i], &t.axis[i, 0], zi)
        if t.jtype[i] == REVOLUTE:
            for k in range(3):
                S[6 * i + k] = zi[k]
            cross3(&p[3 * i], zi, &S[6 * i + 3])
        else:
            for k in range(3):
                S[6 * i + 3 + k] = zi[k]
    for k in range(nq * nq):
        M[k] = 0.0
    for i in range(t.nb):
        if t.jtype[i] == FIXED:
            continue
        I6 = &Ic[36 * i]
        for r in range(6):
            acc = 0.0
            for c in range(6):
                acc = acc + I6[6 * r + c] * S[6 * i + c]
            F[r] = acc
        qi = t.qidx[i]
        acc = 0.0
        for r in range(6):
            acc = acc + S[6 * i + r] * F[r]
        M[qi * nq + qi] = acc
        j = t.parent[i]
        while j >= 0:
            if t.jtype[j] != FIXED:
                qj = t.qidx[j]
                acc = 0.0
                for r in range(6):
                    acc = acc + S[6 * j + r] * F[r]
                M[qi * nq + qj] = acc
                M[qj * nq + qi] = acc
            j = t.parent[j]


cdef void _jacobian(_Tree t, const double* R, const double* p, int body, double* J) noexcept nogil:
    cdef int i, k, nq = t.nq
    cdef double zi[3]
    cdef double d[3]
    cdef double lin[3]
    for k in range(6 * nq):
        J[k] = 0.0
    if body < 0:
        return
    i = body
    while i >= 0:
        if t.jtype[i] != FIXED:
            matvec3(&R[9 * i], &t.axis[i, 0], zi)
            k = t.qidx[i]
            if t.jtype[i] == REVOLUTE:
                d[0] = p[3 * body] - p[3 * i]
                d[1] = p[3 * body + 1] - p[3 * i + 1]
                d[2] = p[3 * body + 2] - p[3 * i + 2]
                cross3(zi, d, lin)
                J[k] = lin[0]
                J[nq + k] = lin[1]
                J[2 * nq + k] = lin[2]
                J[3 * nq + k] = zi[0]
                J[4 * nq + k] = zi[1]
                J[5 * nq + k] = zi[2]
            else:
                J[k] = zi[0]
                J[nq + k] = zi[1]
                J[2 * nq + k] = zi[2]
        i = t.parent[i]


# ---------------------------------------------------------------------------
# Python entry points


def _vec(x, n):
    out = np.ascontiguousarray(x, dtype=np.float64)
    if out.shape != (n,):
        raise ValueError(f"expected a vector of length {n}")
    return out


def placements(tree, q):
    """World rotation (nb, 3, 3) and origin (nb, 3) of every body."""
    cdef _Tree t = _wrap(tree)
    cdef double[::1] qv = _vec(q, t.nq)
    R = np.empty((t.nb, 3, 3))
    p = np.empty((t.nb, 3))
    cdef double[:, :, ::1] Rv = R
    cdef double[:, ::1] pv = p
    if t.nb:
        _placements(t, &qv[0] if t.nq else NULL, &Rv[0, 0, 0], &pv[0, 0])
    return R, p


cdef class _Work:
    # scratch arrays for one tree size
    cdef double[:, :, ::1] R
    cdef double[:, ::1] p, w, vo, dw, ao, z, f, n
    cdef double[::1] Ic, S

    def __init__(self, int nb):
        self.R = np.empty((nb, 3, 3))
        self.p = np.empty((nb, 3))
        self.w = np.empty((nb, 3))
        self.vo = np.empty((nb, 3))
        self.dw = np.empty((nb, 3))
        self.ao = np.empty((nb, 3))
        self.z = np.empty((nb, 3))
        self.f = np.empty((nb, 3))
        self.n = np.empty((nb, 3))
        self.Ic = np.empty(36 * nb)
        self.S = np.empty(6 * nb)


cdef double _dummy[1]


cdef inline double* _ptr1(double[::1] a) noexcept:
    return &a[0] if a.shape[0] else _dummy


def rnea(tree, q, v, a, gravity):
    """Recursive Newton-Euler inverse dynamics in full coordinates."""
    cdef _Tree t = _wrap(tree)
    cdef double[::1] qv = _vec(q, t.nq), vv = _vec(v, t.nq), av = _vec(a, t.nq), gv = _vec(gravity, 3)
    tau = np.zeros(t.nq)
    if t.nb == 0:
        return tau
    cdef double[::1] tv = tau
    cdef _Work s = _Work(t.nb)
    _placements(t, _ptr1(qv), &s.R[0, 0, 0], &s.p[0, 0])
    _rnea(t, &s.R[0, 0, 0], &s.p[0, 0], _ptr1(vv), _ptr1(av), &gv[0],
          &s.w[0, 0], &s.vo[0, 0], &s.dw[0, 0], &s.ao[0, 0], &s.z[0, 0], &s.f[0, 0], &s.n[0, 0], _ptr1(tv))
    return tau


def crba(tree, q):
    """Composite-rigid-body joint-space mass matrix in full coordinates."""
    cdef _Tree t = _wrap(tree)
    cdef double[::1] qv = _vec(q, t.nq)
    M = np.zeros((t.nq, t.nq))
    if t.nb == 0 or t.nq == 0:
        return M
    cdef double[:, ::1] Mv = M
    cdef _Work s = _Work(t.nb)
    _placements(t, _ptr1(qv), &s.R[0, 0, 0], &s.p[0, 0])
    _crba(t, &s.R[0, 0, 0], &s.p[0, 0], &s.Ic[0], &s.S[0], &Mv[0, 0])
    return M


def jacobian(tree, q, int body):
    """World-aligned 6 x nq Jacobian (linear; angular) of a body origin."""
    cdef _Tree t = _wrap(tree)
    cdef double[::1] qv = _vec(q, t.nq)
    J = np.zeros((6, t.nq))
    if body < 0 or t.nq == 0:
        return J
    cdef double[:, ::1] Jv = J
    cdef _Work s = _Work(t.nb)
    _placements(t, _ptr1(qv), &s.R[0, 0, 0], &s.p[0, 0])
    _jacobian(t, &s.R[0, 0, 0], &s.p[0, 0], body, &Jv[0, 0])
    return J


def bias_acceleration(tree, q, v, int body):
    """``Jdot @ v`` of a body origin: classical linear and angular acceleration
    at zero joint acceleration and zero gravity."""
    cdef _Tree t = _wrap(tree)
    cdef double[::1] qv = _vec(q, t.nq), vv = _vec(v, t.nq)
    if body < 0:
        return np.zeros(6)
    cdef double[::1] zeros = np.zeros(max(t.nq, 1))
    cdef double g0[3]
    g0[0] = g0[1] = g0[2] = 0.0
    cdef _Work s = _Work(t.nb)
    _placements(t, _ptr1(qv), &s.R[0, 0, 0], &s.p[0, 0])
    _motion(t, &s.R[0, 0, 0], &s.p[0, 0], _ptr1(vv), &zeros[0], g0,
            &s.w[0, 0], &s.vo[0, 0], &s.dw[0, 0], &s.ao[0, 0], &s.z[0, 0])
    return np.concatenate([np.asarray(s.ao[body]), np.asarray(s.dw[body])])


def dynamics_terms(tree, q, v, int body, gravity):
    """Everything one control step needs, from a single placement pass.

    Returns ``(M, bias, J, Jdot_v, R_body, p_body)`` in full coordinates;
    ``bias`` excludes joint damping.
    """
    cdef _Tree t = _wrap(tree)
    cdef double[::1] qv = _vec(q, t.nq), vv = _vec(v, t.nq), gv = _vec(gravity, 3)
    cdef int nq = t.nq
    M = np.zeros((nq, nq))
    bias = np.zeros(nq)
    J = np.zeros((6, nq))
    if t.nb == 0 or nq == 0:
        return M, bias, J, np.zeros(6), np.eye(3), np.zeros(3)
    cdef double[:, ::1] Mv = M, Jv = J
    cdef double[::1] bv = bias
    cdef double[::1] zeros = np.zeros(nq)
    cdef double g0[3]
    g0[0] = g0[1] = g0[2] = 0.0
    cdef _Work s = _Work(t.nb)
    cdef double* R = &s.R[0, 0, 0]
    cdef double* p = &s.p[0, 0]
    _placements(t, &qv[0], R, p)
    _crba(t, R, p, &s.Ic[0], &s.S[0], &Mv[0, 0])
    _rnea(t, R, p, &vv[0], &zeros[0], &gv[0], &s.w[0, 0], &s.vo[0, 0], &s.dw[0, 0], &s.ao[0, 0],
          &s.z[0, 0], &s.f[0, 0], &s.n[0, 0], &bv[0])
    _jacobian(t, R, p, body, &Jv[0, 0])
    if body < 0:
        return M, bias, J, np.zeros(6), np.eye(3), np.zeros(3)
    _motion(t, R, p, &vv[0], &zeros[0], g0, &s.w[0, 0], &s.vo[0, 0], &s.dw[0, 0], &s.ao[0, 0], &s.z[0, 0])
    jdv = np.concatenate([np.asarray(s.ao[body]), np.asarray(s.dw[body])])
    return M, bias, J, jdv, np.array(s.R[body]), np.array(s.p[body])


# ---------------------------------------------------------------------------
# dense QP: Goldfarb-Idnani dual active set
#
#   minimize 1/2 x'Hx + g'x  subject to  C x <= d


cdef inline void _givens(double a, double b, double* c, double* s, double* h) noexcept nogil:
    h[0] = hypot(a, b)
    if h[0] == 0.0:
        c[0] = 1.0
        s[0] = 0.0
    else:
        c[0] = a / h[0]
        s[0] = b / h[0]


cdef void _rotate_cols(double[:, ::1] A, int rows, int j0, int j1, double c, double s) noexcept nogil:
    cdef int i
    cdef double a, b
    for i in range(rows):
        a = A[i, j0]
        b = A[i, j1]
        A[i, j0] = c * a + s * b
        A[i, j1] = -s * a + c * b


def solve_qp(H, g, C, d, int max_iter=200):
    """Returns ``(x, lam, status, iterations, active)``.

    ``lam`` holds one nonnegative multiplier per row of ``C``. The lowest
    index violated constraint enters the active set first.
    """
    cdef int i, j
    cdef double acc
    cdef double[:, ::1] Hv = np.ascontiguousarray(H, dtype=np.float64)
    ga = np.ascontiguousarray(g, dtype=np.float64)
    cdef int n = ga.shape[0]
    Ca = np.ascontiguousarray(np.asarray(C, dtype=np.float64).reshape(-1, n))
    da = np.ascontiguousarray(d, dtype=np.float64)
    cdef int m = da.shape[0]
    if Hv.shape[0] != n or Hv.shape[1] != n:
        raise ValueError("H must be n x n")
    # one scratch block: J, R (n x n each), then vectors
    work = np.zeros(2 * n * n + 6 * n + 3)
    cdef double[::1] wv = work
    cdef double[:, ::1] J = work[:n * n].reshape(n, n)
    cdef double[:, ::1] R = work[n * n:2 * n * n].reshape(n, n)
    cdef double[:, ::1] Cv = Ca if m else np.zeros((1, n))
    cdef double[::1] dv = da if m else np.zeros(1)
    cdef double[::1] gv = ga
    x_arr = np.zeros(n)
    cdef double[::1] x = x_arr
    lam_arr = np.zeros(m)
    cdef double[::1] lam = lam_arr if m else np.zeros(1)
    iwork = np.zeros(n + 1 + max(m, 1), dtype=np.int32)
    cdef int[::1] active = iwork[:n + 1]
    cdef int[::1] inact = iwork[n + 1:]
    cdef double[::1] u = work[2 * n * n:2 * n * n + n + 1]
    cdef double[::1] npv = work[2 * n * n + n + 1:2 * n * n + 2 * n + 1]
    cdef double[::1] dvec = work[2 * n * n + 2 * n + 1:2 * n * n + 3 * n + 1]
    cdef double[::1] z = work[2 * n * n + 3 * n + 1:2 * n * n + 4 * n + 1]
    cdef double[::1] r = work[2 * n * n + 4 * n + 1:2 * n * n + 5 * n + 2]
    cdef double[::1] tmpv = work[2 * n * n + 5 * n + 2:2 * n * n + 6 * n + 2]
    cdef double scale = 1.0
    cdef int ok
    for i in range(m):
        if fabs(dv[i]) + 1.0 > scale:
            scale = fabs(dv[i]) + 1.0
    with nogil:
        ok = _inverse_cholesky_factor(Hv, J, R, n)
        if ok:
            # x0 = -J J' g
            for j in range(n):
                acc = 0.0
                for i in range(n):
                    acc = acc + J[i, j] * gv[i]
                tmpv[j] = acc
            for i in range(n):
                acc = 0.0
                for j in range(n):
                    acc = acc + J[i, j] * tmpv[j]
                x[i] = -acc
    if not ok:
        raise np.linalg.LinAlgError("Matrix is not positive definite")
    cdef double tol = 1e-12 * scale
    cdef int it = 0, q = 0, k, p_idx, l_pos, status
    cdef double slack, t1, t2, t, zn, znorm, cval, u_plus, ratio, cc, ss, hh, a, b
    with nogil:
        while True:
            p_idx = -1
            for i in range(m):
                if inact[i]:
                    continue
                acc = dv[i]
                for j in range(n):
                    acc = acc - Cv[i, j] * x[j]
                if acc < -tol:
                    p_idx = i
                    break
            if p_idx < 0:
                status = C_OPTIMAL
                break
            for j in range(n):
                npv[j] = -Cv[p_idx, j]
            u_plus = 0.0
            status = -1
            while True:
                it += 1
                if it > max_iter:
                    status = C_MAX_ITER
                    break
                for j in range(n):
                    acc = 0.0
                    for i in range(n):
                        acc = acc + J[i, j] * npv[i]
                    dvec[j] = acc
                znorm = 0.0
                zn = 0.0
                for i in range(n):
                    acc = 0.0
                    for j in range(q, n):
                        acc = acc + J[i, j] * dvec[j]
                    z[i] = acc
                    znorm = znorm + acc * acc
                    zn = zn + acc * npv[i]
                znorm = sqrt(znorm)
                for i in range(q - 1, -1, -1):
                    acc = dvec[i]
                    for j in range(i + 1, q):
                        acc = acc - R[i, j] * r[j]
                    r[i] = acc / R[i, i]
                t1 = INFINITY
                l_pos = -1
                for k in range(q):
                    if r[k] > 0.0:
                        ratio = u[k] / r[k]
                        if ratio < t1:
                            t1 = ratio
                            l_pos = k
                cval = dv[p_idx]
                for j in range(n):
                    cval = cval + npv[j] * x[j]
                if znorm > 1e-14 and zn > 0.0:
                    t2 = -cval / zn
                else:
                    t2 = INFINITY
                t = t1 if t1 < t2 else t2
                if t == INFINITY:
                    status = C_INFEASIBLE
                    break
                if t2 == INFINITY:
                    for k in range(q):
                        u[k] = u[k] - t * r[k]
                    u_plus = u_plus + t
                    q = _delete(R, J, active, inact, u, q, l_pos, n)
                    continue
                for j in range(n):
                    x[j] = x[j] + t * z[j]
                for k in range(q):
                    u[k] = u[k] - t * r[k]
                u_plus = u_plus + t
                if t == t2:
                    # add p_idx
                    for j in range(n - 1, q, -1):
                        _givens(dvec[j - 1], dvec[j], &cc, &ss, &hh)
                        if hh == 0.0:
                            continue
                        dvec[j - 1] = hh
                        dvec[j] = 0.0
                        _rotate_cols(J, n, j - 1, j, cc, ss)
                    for i in range(q + 1):
                        R[i, q] = dvec[i]
                    active[q] = p_idx
                    inact[p_idx] = 1
                    u[q] = u_plus
                    q += 1
                    break
                q = _delete(R, J, active, inact, u, q, l_pos, n)
            if status >= 0:
                break
    for k in range(q):
        lam[active[k]] = u[k]
    return np.asarray(x).copy(), lam_arr, status, it, [int(active[k]) for k in range(q)]


cdef int _inverse_cholesky_factor(double[:, ::1] H, double[:, ::1] J, double[:, ::1] L, int n) noexcept nogil:
    """J = inv(L)' with H = L L'; L is scratch and is zeroed afterwards.
    Returns 0 when H is not positive definite."""
    cdef int i, j, k
    cdef double acc
    for j in range(n):
        acc = H[j, j]
        for k in range(j):
            acc = acc - L[j, k] * L[j, k]
        if not acc > 0.0:
            return 0
        L[j, j] = sqrt(acc)
        for i in range(j + 1, n):
            acc = H[i, j]
            for k in range(j):
                acc = acc - L[i, k] * L[j, k]
            L[i, j] = acc / L[j, j]
    # inv(L) is lower triangular; store its transpose in J column by column
    for j in range(n):
        J[j, j] = 1.0 / L[j, j]
        for i in range(j + 1, n):
            acc = 0.0
            for k in range(j, i):
                acc = acc - L[i, k] * J[j, k]
            J[j, i] = acc / L[i, i]
    for i in range(n):
        for j in range(n):
            L[i, j] = 0.0
    return 1


cdef int _delete(double[:, ::1] R, double[:, ::1] J, int[::1] active, int[::1] inact, double[::1] u,
                 int q, int pos, int n) noexcept nogil:
    cdef int k, c, i
    cdef double cc, ss, hh, a, b
    inact[active[pos]] = 0
    for k in range(pos, q - 1):
        active[k] = active[k + 1]
        u[k] = u[k + 1]
    for k in range(pos, q - 1):
        for i in range(n):
            R[i, k] = R[i, k + 1]
    for i in range(n):
        R[i, q - 1] = 0.0
    for k in range(pos, q - 1):
        _givens(R[k, k], R[k + 1, k], &cc, &ss, &hh)
        if hh == 0.0:
            continue
        for c in range(k, q - 1):
            a = R[k, c]
            b = R[k + 1, c]
            R[k, c] = cc * a + ss * b
            R[k + 1, c] = -ss * a + cc * b
        R[k + 1, k] = 0.0
        _rotate_cols(J, n, k, k + 1, cc, ss)
    return q - 1
