# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernel backend; numerically mirrors `_ref`."""

from libc.math cimport cos, sin, sqrt, INFINITY

import numpy as np
cimport numpy as cnp

cnp.import_array()

BACKEND = "cython"


cdef class MDView:
    cdef int nb, n, nj, m, npts, nint, l
    cdef double gravity
    cdef int[::1] parent, joint_of_body, dof_count, joint_body, act_joint
    cdef int[::1] cp_body, cp_limb, ip_body
    cdef int[:, ::1] dof_list
    cdef double[::1] mount, mass, inertia
    cdef double[:, ::1] attach, com, cp_off, ip_off

    def __cinit__(self, md):
        self.nb = md.nb
        self.n = md.n
        self.nj = md.nj
        self.m = md.m
        self.npts = md.npts
        self.nint = md.nint
        self.l = md.l
        self.gravity = md.gravity
        self.parent = md.parent
        self.joint_of_body = md.joint_of_body
        self.dof_count = md.dof_count
        self.dof_list = md.dof_list
        self.joint_body = md.joint_body
        self.act_joint = md.act_joint
        self.cp_body = md.cp_body
        self.cp_limb = md.cp_limb
        self.ip_body = md.ip_body
        self.mount = md.mount
        self.mass = md.mass
        self.inertia = md.inertia
        self.attach = md.attach
        self.com = md.com
        self.cp_off = md.cp_off
        self.ip_off = md.ip_off


cdef class EView:
    cdef int nseg
    cdef double mu
    cdef double[:, ::1] a, b, tang, nrm

    def __cinit__(self, env):
        self.nseg = env.nseg
        self.mu = env.mu
        self.a = env.a
        self.b = env.b
        self.tang = env.tang
        self.nrm = env.nrm


cdef void _fk(MDView md, double[::1] q, double[:, ::1] pos, double[::1] ang) noexcept:
    cdef int i, p
    cdef double c, s, ax, ay
    pos[0, 0] = q[0]
    pos[0, 1] = q[1]
    ang[0] = q[2]
    for i in range(1, md.nb):
        p = md.parent[i]
        c = cos(ang[p]); s = sin(ang[p])
        ax = md.attach[i, 0]; ay = md.attach[i, 1]
        pos[i, 0] = pos[p, 0] + c * ax - s * ay
        pos[i, 1] = pos[p, 1] + s * ax + c * ay
        ang[i] = ang[p] + md.mount[i] + q[3 + md.joint_of_body[i]]


cdef void _rates(MDView md, double[::1] qd, double[::1] om) noexcept:
    cdef int i
    om[0] = qd[2]
    for i in range(1, md.nb):
        om[i] = om[md.parent[i]] + qd[3 + md.joint_of_body[i]]


cdef void _vel_pass(MDView md, double[::1] q, double[::1] qd,
                    double[:, ::1] pos, double[::1] ang, double[::1] om,
                    double[:, ::1] vo, double[:, ::1] ao) noexcept:
    cdef int i, p
    cdef double c, s, ax, ay, wx, wy
    _fk(md, q, pos, ang)
    _rates(md, qd, om)
    vo[0, 0] = qd[0]; vo[0, 1] = qd[1]
    ao[0, 0] = 0.0; ao[0, 1] = 0.0
    for i in range(1, md.nb):
        p = md.parent[i]
        c = cos(ang[p]); s = sin(ang[p])
        ax = md.attach[i, 0]; ay = md.attach[i, 1]
        wx = c * ax - s * ay
        wy = s * ax + c * ay
        vo[i, 0] = vo[p, 0] - om[p] * wy
        vo[i, 1] = vo[p, 1] + om[p] * wx
        ao[i, 0] = ao[p, 0] - om[p] * om[p] * wx
        ao[i, 1] = ao[p, 1] - om[p] * om[p] * wy


cdef inline void _world_point(MDView md, double[:, ::1] pos, double[::1] ang,
                              int body, double ox, double oy,
                              double* wx, double* wy) noexcept:
    cdef double c = cos(ang[body]), s = sin(ang[body])
    wx[0] = pos[body, 0] + c * ox - s * oy
    wy[0] = pos[body, 1] + s * ox + c * oy


cdef void _point_jac(MDView md, double[:, ::1] pos, double[::1] ang,
                     int body, double ox, double oy, double[:, ::1] J) noexcept:
    """Fill (2, n) world-velocity Jacobian of a body-fixed point; zeroes first."""
    cdef int t, col, anchor
    cdef double wx, wy
    cdef int k
    for k in range(md.n):
        J[0, k] = 0.0
        J[1, k] = 0.0
    _world_point(md, pos, ang, body, ox, oy, &wx, &wy)
    J[0, 0] = 1.0
    J[1, 1] = 1.0
    J[0, 2] = -(wy - pos[0, 1])
    J[1, 2] = wx - pos[0, 0]
    for t in range(md.dof_count[body]):
        col = md.dof_list[body, t]
        anchor = md.joint_body[col - 3]
        J[0, col] = -(wy - pos[anchor, 1])
        J[1, col] = wx - pos[anchor, 0]


cdef void _mass_matrix(MDView md, double[:, ::1] pos, double[::1] ang,
                       double[:, ::1] Jv, int[::1] cols, double[:, ::1] D) noexcept:
    cdef int i, j, k, nc, ca, cb
    cdef double mi
    for j in range(md.n):
        for k in range(md.n):
            D[j, k] = 0.0
    for i in range(md.nb):
        _point_jac(md, pos, ang, i, md.com[i, 0], md.com[i, 1], Jv)
        cols[0] = 0; cols[1] = 1; cols[2] = 2
        nc = 3
        for k in range(md.dof_count[i]):
            cols[nc] = md.dof_list[i, k]
            nc += 1
        mi = md.mass[i]
        for j in range(nc):
            ca = cols[j]
            for k in range(nc):
                cb = cols[k]
                D[ca, cb] += mi * (Jv[0, ca] * Jv[0, cb] + Jv[1, ca] * Jv[1, cb])
        for j in range(2, nc):
            ca = cols[j]
            for k in range(2, nc):
                D[ca, cols[k]] += md.inertia[i]


cdef void _bias(MDView md, double[:, ::1] pos, double[::1] ang, double[::1] om,
                double[:, ::1] vo, double[:, ::1] ao,
                double[:, ::1] Jv, int[::1] cols,
                double[::1] C, double[::1] G) noexcept:
    cdef int i, j, k, nc, col
    cdef double c, s, rx, ry, acx, acy, mi
    for k in range(md.n):
        C[k] = 0.0
        G[k] = 0.0
    for i in range(md.nb):
        c = cos(ang[i]); s = sin(ang[i])
        rx = c * md.com[i, 0] - s * md.com[i, 1]
        ry = s * md.com[i, 0] + c * md.com[i, 1]
        acx = ao[i, 0] - om[i] * om[i] * rx
        acy = ao[i, 1] - om[i] * om[i] * ry
        _point_jac(md, pos, ang, i, md.com[i, 0], md.com[i, 1], Jv)
        cols[0] = 0; cols[1] = 1; cols[2] = 2
        nc = 3
        for k in range(md.dof_count[i]):
            cols[nc] = md.dof_list[i, k]
            nc += 1
        mi = md.mass[i]
        for j in range(nc):
            col = cols[j]
            C[col] += mi * (Jv[0, col] * acx + Jv[1, col] * acy)
            G[col] += mi * md.gravity * Jv[1, col]


cdef int _chol_solve(double[:, ::1] A, double[::1] b, double[::1] x,
                     double[:, ::1] L) except -1:
    """Solve SPD A x = b via Cholesky into scratch L."""
    cdef int n = A.shape[0]
    cdef int i, j, k
    cdef double s
    for i in range(n):
        for j in range(i + 1):
            s = A[i, j]
            for k in range(j):
                s -= L[i, k] * L[j, k]
            if i == j:
                if s <= 0.0:
                    raise np.linalg.LinAlgError("matrix not positive definite")
                L[i, i] = sqrt(s)
            else:
                L[i, j] = s / L[j, j]
    for i in range(n):
        s = b[i]
        for k in range(i):
            s -= L[i, k] * x[k]
        x[i] = s / L[i, i]
    for i in range(n - 1, -1, -1):
        s = x[i]
        for k in range(i + 1, n):
            s -= L[k, i] * x[k]
        x[i] = s / L[i, i]
    return 0


cdef void _sd_point(EView env, double px, double py,
                    double* dist, double* tx, double* ty,
                    double* nx, double* ny, int* seg) noexcept:
    cdef int j, bj = 0
    cdef double best = INFINITY
    cdef double ax, ay, bx, by, ex, ey, qx, qy, t, dx, dy, d, sd
    for j in range(env.nseg):
        ax = env.a[j, 0]; ay = env.a[j, 1]
        bx = env.b[j, 0]; by = env.b[j, 1]
        ex = bx - ax; ey = by - ay
        qx = px - ax; qy = py - ay
        t = (qx * ex + qy * ey) / (ex * ex + ey * ey)
        if t < 0.0:
            t = 0.0
        elif t > 1.0:
            t = 1.0
        dx = qx - t * ex
        dy = qy - t * ey
        d = sqrt(dx * dx + dy * dy)
        if dx * env.nrm[j, 0] + dy * env.nrm[j, 1] >= 0.0:
            sd = d
        else:
            sd = -d
        if sd < best:
            best = sd
            bj = j
    dist[0] = best
    seg[0] = bj
    tx[0] = env.tang[bj, 0]; ty[0] = env.tang[bj, 1]
    nx[0] = env.nrm[bj, 0]; ny[0] = env.nrm[bj, 1]


# -- public API mirroring _ref ------------------------------------------------

def fk(md_obj, q):
    cdef MDView md = MDView(md_obj)
    pos = np.empty((md.nb, 2))
    ang = np.empty(md.nb)
    cdef double[::1] qv = np.ascontiguousarray(q, dtype=np.float64)
    _fk(md, qv, pos, ang)
    return pos, ang


def points_world(md_obj, q, body, off):
    cdef MDView md = MDView(md_obj)
    cdef double[::1] qv = np.ascontiguousarray(q, dtype=np.float64)
    cdef int[::1] bv = np.ascontiguousarray(body, dtype=np.int32)
    cdef double[:, ::1] ov = np.ascontiguousarray(off, dtype=np.float64).reshape(-1, 2)
    cdef int k = bv.shape[0]
    out = np.empty((k, 2))
    cdef double[:, ::1] o = out
    pos_ = np.empty((md.nb, 2)); ang_ = np.empty(md.nb)
    cdef double[:, ::1] pos = pos_
    cdef double[::1] ang = ang_
    _fk(md, qv, pos, ang)
    cdef int i
    cdef double wx, wy
    for i in range(k):
        _world_point(md, pos, ang, bv[i], ov[i, 0], ov[i, 1], &wx, &wy)
        o[i, 0] = wx
        o[i, 1] = wy
    return out


def point_jacobians(md_obj, q, body, off):
    cdef MDView md = MDView(md_obj)
    cdef double[::1] qv = np.ascontiguousarray(q, dtype=np.float64)
    cdef int[::1] bv = np.ascontiguousarray(body, dtype=np.int32)
    cdef double[:, ::1] ov = np.ascontiguousarray(off, dtype=np.float64).reshape(-1, 2)
    cdef int k = bv.shape[0]
    J = np.zeros((k, 2, md.n))
    pos_ = np.empty((md.nb, 2)); ang_ = np.empty(md.nb)
    cdef double[:, ::1] pos = pos_
    cdef double[::1] ang = ang_
    _fk(md, qv, pos, ang)
    cdef int i
    for i in range(k):
        _point_jac(md, pos, ang, bv[i], ov[i, 0], ov[i, 1], J[i])
    return J


def mass_matrix(md_obj, q):
    cdef MDView md = MDView(md_obj)
    cdef double[::1] qv = np.ascontiguousarray(q, dtype=np.float64)
    D = np.empty((md.n, md.n))
    pos_ = np.empty((md.nb, 2)); ang_ = np.empty(md.nb)
    Jv_ = np.zeros((2, md.n)); cols_ = np.empty(md.n, dtype=np.int32)
    cdef double[:, ::1] pos = pos_
    cdef double[::1] ang = ang_
    _fk(md, qv, pos, ang)
    _mass_matrix(md, pos, ang, Jv_, cols_, D)
    return D


def bias_terms(md_obj, q, qd):
    cdef MDView md = MDView(md_obj)
    cdef double[::1] qv = np.ascontiguousarray(q, dtype=np.float64)
    cdef double[::1] qdv = np.ascontiguousarray(qd, dtype=np.float64)
    C = np.empty(md.n); G = np.empty(md.n)
    pos_ = np.empty((md.nb, 2)); ang_ = np.empty(md.nb); om_ = np.empty(md.nb)
    vo_ = np.empty((md.nb, 2)); ao_ = np.empty((md.nb, 2))
    Jv_ = np.zeros((2, md.n)); cols_ = np.empty(md.n, dtype=np.int32)
    cdef double[:, ::1] pos = pos_, vo = vo_, ao = ao_
    cdef double[::1] ang = ang_, om = om_
    _vel_pass(md, qv, qdv, pos, ang, om, vo, ao)
    _bias(md, pos, ang, om, vo, ao, Jv_, cols_, C, G)
    return C, G


def kinetic_energy(md_obj, q, qd):
    cdef MDView md = MDView(md_obj)
    D = mass_matrix(md_obj, q)
    qdv = np.ascontiguousarray(qd, dtype=np.float64)
    return 0.5 * float(qdv @ D @ qdv)


def signed_distances(env_obj, pts):
    cdef EView env = EView(env_obj)
    cdef double[:, ::1] p = np.ascontiguousarray(pts, dtype=np.float64).reshape(-1, 2)
    cdef int k = p.shape[0]
    d = np.empty(k); tang = np.empty((k, 2)); nrm = np.empty((k, 2))
    seg = np.empty(k, dtype=np.int32)
    cdef double[::1] dv = d
    cdef double[:, ::1] tv = tang, nv = nrm
    cdef int[::1] sv = seg
    cdef int i, sj
    cdef double dd, tx, ty, nx, ny
    for i in range(k):
        _sd_point(env, p[i, 0], p[i, 1], &dd, &tx, &ty, &nx, &ny, &sj)
        dv[i] = dd
        tv[i, 0] = tx; tv[i, 1] = ty
        nv[i, 0] = nx; nv[i, 1] = ny
        sv[i] = sj
    return d, tang, nrm, seg


def contact_jacobian(md_obj, env_obj, q):
    cdef MDView md = MDView(md_obj)
    cdef EView env = EView(env_obj)
    cdef double[::1] qv = np.ascontiguousarray(q, dtype=np.float64)
    J = np.empty((md.l, md.n))
    pos_ = np.empty((md.nb, 2)); ang_ = np.empty(md.nb)
    Jp_ = np.zeros((2, md.n))
    cdef double[:, ::1] pos = pos_, Jp = Jp_, Jout = J
    cdef double[::1] ang = ang_
    _fk(md, qv, pos, ang)
    cdef int p, k, sj
    cdef double wx, wy, dd, tx, ty, nx, ny
    for p in range(md.npts):
        _world_point(md, pos, ang, md.cp_body[p], md.cp_off[p, 0], md.cp_off[p, 1], &wx, &wy)
        _sd_point(env, wx, wy, &dd, &tx, &ty, &nx, &ny, &sj)
        _point_jac(md, pos, ang, md.cp_body[p], md.cp_off[p, 0], md.cp_off[p, 1], Jp)
        for k in range(md.n):
            Jout[2 * p, k] = tx * Jp[0, k] + ty * Jp[1, k]
            Jout[2 * p + 1, k] = nx * Jp[0, k] + ny * Jp[1, k]
    return J


cdef void _accel_into(MDView md, EView env, double[::1] q, double[::1] qd,
                      double[::1] u, double[::1] lam,
                      double[:, ::1] pos, double[::1] ang, double[::1] om,
                      double[:, ::1] vo, double[:, ::1] ao,
                      double[:, ::1] Jv, int[::1] cols, double[:, ::1] D,
                      double[::1] C, double[::1] G, double[::1] rhs,
                      double[:, ::1] L, double[::1] qdd) except *:
    cdef int k, p, sj
    cdef double wx, wy, dd, tx, ty, nx, ny, lt, ln
    _vel_pass(md, q, qd, pos, ang, om, vo, ao)
    _mass_matrix(md, pos, ang, Jv, cols, D)
    _bias(md, pos, ang, om, vo, ao, Jv, cols, C, G)
    for k in range(md.n):
        rhs[k] = -C[k] - G[k]
    for k in range(md.m):
        rhs[md.act_joint[k]] += u[k]
    for p in range(md.npts):
        lt = lam[2 * p]; ln = lam[2 * p + 1]
        if lt != 0.0 or ln != 0.0:
            _world_point(md, pos, ang, md.cp_body[p], md.cp_off[p, 0], md.cp_off[p, 1], &wx, &wy)
            _sd_point(env, wx, wy, &dd, &tx, &ty, &nx, &ny, &sj)
            _point_jac(md, pos, ang, md.cp_body[p], md.cp_off[p, 0], md.cp_off[p, 1], Jv)
            for k in range(md.n):
                rhs[k] += (lt * tx + ln * nx) * Jv[0, k] + (lt * ty + ln * ny) * Jv[1, k]
    _chol_solve(D, rhs, qdd, L)


def accel(md_obj, env_obj, q, qd, u, lam):
    cdef MDView md = MDView(md_obj)
    cdef EView env = EView(env_obj)
    cdef double[::1] qv = np.ascontiguousarray(q, dtype=np.float64)
    cdef double[::1] qdv = np.ascontiguousarray(qd, dtype=np.float64)
    cdef double[::1] uv = np.ascontiguousarray(u, dtype=np.float64)
    cdef double[::1] lv = np.ascontiguousarray(lam, dtype=np.float64)
    qdd = np.empty(md.n)
    pos_ = np.empty((md.nb, 2)); ang_ = np.empty(md.nb); om_ = np.empty(md.nb)
    vo_ = np.empty((md.nb, 2)); ao_ = np.empty((md.nb, 2))
    Jv_ = np.zeros((2, md.n)); cols_ = np.empty(md.n, dtype=np.int32)
    D_ = np.empty((md.n, md.n)); C_ = np.empty(md.n); G_ = np.empty(md.n)
    rhs_ = np.empty(md.n); L_ = np.empty((md.n, md.n))
    _accel_into(md, env, qv, qdv, uv, lv, pos_, ang_, om_, vo_, ao_,
                Jv_, cols_, D_, C_, G_, rhs_, L_, qdd)
    return qdd


def eval_all(md_obj, env_obj, rc, z):
    """Objective, equality rows and inequality rows; mirrors `_ref.eval_all`."""
    cdef MDView md = MDView(md_obj)
    cdef EView env = EView(env_obj)
    cdef double[::1] zv = np.ascontiguousarray(z, dtype=np.float64)

    cdef int nd = rc.nd
    cdef int[::1] act = rc.act
    cdef int[::1] inact = rc.inact
    cdef double[::1] eps_in = rc.eps_inact
    cdef double[::1] eps_int = rc.eps_internal
    cdef int[::1] term = rc.term_pts
    cdef int[::1] skip = rc.skip_cone_last
    cdef int[::1] hol_pts = rc.hol_pts
    cdef int[::1] hol_bodies = rc.hol_bodies
    cdef double margin = rc.cone_margin
    cdef int ka = act.shape[0], kb = inact.shape[0], kt = term.shape[0]
    cdef int kh = hol_pts.shape[0], kw = hol_bodies.shape[0]
    cdef int eq_knot_rows = ka + 2 * kh + kw
    cdef int n = md.n, m = md.m, l = md.l, blk = 2 * n + m + l

    n_eq, n_ineq = rc.counts(md_obj)
    c_eq = np.empty(n_eq)
    c_ineq = np.empty(n_ineq)
    cdef double[::1] eq = c_eq
    cdef double[::1] ineq = c_ineq

    # scratch
    pos_ = np.empty((md.nb, 2)); ang_ = np.empty(md.nb); om_ = np.empty(md.nb)
    vo_ = np.empty((md.nb, 2)); ao_ = np.empty((md.nb, 2))
    Jv_ = np.zeros((2, md.n)); cols_ = np.empty(md.n, dtype=np.int32)
    D_ = np.empty((md.n, md.n)); C_ = np.empty(md.n); G_ = np.empty(md.n)
    rhs_ = np.empty(md.n); L_ = np.empty((md.n, md.n))
    accs_ = np.empty((nd, n))
    cpts_ = np.empty((max(md.npts, 1), 2))
    dist_ = np.empty(max(md.npts, 1))
    frames_ = np.empty((max(md.npts, 1), 4))
    qm_ = np.empty(n); vm_ = np.empty(n); am_ = np.empty(n)
    um_ = np.empty(m); lm_ = np.empty(l)
    cdef double[:, ::1] pos = pos_, vo = vo_, ao = ao_, Jv = Jv_, D = D_, L = L_
    cdef double[:, ::1] accs = accs_, cpts = cpts_, frames = frames_
    cdef double[::1] ang = ang_, om = om_, C = C_, G = G_, rhs = rhs_
    cdef double[::1] dist = dist_, qm = qm_, vm = vm_, am = am_, um = um_, lm = lm_
    cdef int[::1] cols = cols_

    cdef double h = zv[0]
    cdef double mu2 = env.mu * env.mu
    cdef int e = 0, g = 0
    cdef int k, p, i, j, off, off2, sj, idx, b
    cdef double wx, wy, dd, tx, ty, nx, ny, vx, vy, lt, ln, acc_term
    cdef int doff = (nd - 1) * eq_knot_rows
    cdef int toff = doff + (nd - 1) * n

    for k in range(nd):
        off = 1 + k * blk
        # knot dynamics and acceleration
        _accel_into(md, env, zv[off:off + n], zv[off + n:off + 2 * n],
                    zv[off + 2 * n:off + 2 * n + m], zv[off + 2 * n + m:off + blk],
                    pos, ang, om, vo, ao, Jv, cols, D, C, G, rhs, L, accs[k])
        # contact geometry at this knot (pos/ang valid from _accel_into)
        for p in range(md.npts):
            _world_point(md, pos, ang, md.cp_body[p], md.cp_off[p, 0], md.cp_off[p, 1], &wx, &wy)
            cpts[p, 0] = wx; cpts[p, 1] = wy
            _sd_point(env, wx, wy, &dd, &tx, &ty, &nx, &ny, &sj)
            dist[p] = dd
            frames[p, 0] = tx; frames[p, 1] = ty; frames[p, 2] = nx; frames[p, 3] = ny
        if k >= 1:
            for idx in range(ka):
                eq[e + idx] = dist[act[idx]]
            e += ka
            for idx in range(kh):
                p = hol_pts[idx]
                b = md.cp_body[p]
                vx = vo[b, 0] - om[b] * (cpts[p, 1] - pos[b, 1])
                vy = vo[b, 1] + om[b] * (cpts[p, 0] - pos[b, 0])
                eq[e + 2 * idx] = frames[p, 0] * vx + frames[p, 1] * vy
                eq[e + 2 * idx + 1] = frames[p, 2] * vx + frames[p, 3] * vy
            e += 2 * kh
            for idx in range(kw):
                eq[e + idx] = om[hol_bodies[idx]]
            e += kw
        for idx in range(ka):
            p = act[idx]
            sj = 0
            if k == nd - 1:
                for j in range(skip.shape[0]):
                    if skip[j] == p:
                        sj = 1
                        break
            if sj:
                continue
            lt = zv[off + 2 * n + m + 2 * p]
            ln = zv[off + 2 * n + m + 2 * p + 1]
            ineq[g] = mu2 * ln * ln - lt * lt - margin
            g += 1
        if k >= 1:
            for idx in range(kb):
                ineq[g + idx] = dist[inact[idx]] - eps_in[idx]
            g += kb
            for p in range(md.nint):
                _world_point(md, pos, ang, md.ip_body[p], md.ip_off[p, 0], md.ip_off[p, 1], &wx, &wy)
                _sd_point(env, wx, wy, &dd, &tx, &ty, &nx, &ny, &sj)
                ineq[g + p] = dd - eps_int[p]
            g += md.nint
        if k == nd - 1:
            for idx in range(kt):
                eq[toff + idx] = dist[term[idx]]

    # midpoint defects
    for i in range(nd - 1):
        off = 1 + i * blk
        off2 = 1 + (i + 1) * blk
        for j in range(n):
            qm[j] = 0.5 * (zv[off + j] + zv[off2 + j]) + h * (zv[off + n + j] - zv[off2 + n + j]) / 8.0
            vm[j] = 0.5 * (zv[off + n + j] + zv[off2 + n + j]) + h * (accs[i, j] - accs[i + 1, j]) / 8.0
            am[j] = 1.5 * (zv[off2 + n + j] - zv[off + n + j]) / h - 0.25 * (accs[i, j] + accs[i + 1, j])
        for j in range(m):
            um[j] = 0.5 * (zv[off + 2 * n + j] + zv[off2 + 2 * n + j])
        for j in range(l):
            lm[j] = 0.5 * (zv[off + 2 * n + m + j] + zv[off2 + 2 * n + m + j])
        _fk(md, qm, pos, ang)
        _rates(md, vm, om)
        vo[0, 0] = vm[0]; vo[0, 1] = vm[1]
        ao[0, 0] = 0.0; ao[0, 1] = 0.0
        for j in range(1, md.nb):
            p = md.parent[j]
            tx = cos(ang[p]); ty = sin(ang[p])
            wx = tx * md.attach[j, 0] - ty * md.attach[j, 1]
            wy = ty * md.attach[j, 0] + tx * md.attach[j, 1]
            vo[j, 0] = vo[p, 0] - om[p] * wy
            vo[j, 1] = vo[p, 1] + om[p] * wx
            ao[j, 0] = ao[p, 0] - om[p] * om[p] * wx
            ao[j, 1] = ao[p, 1] - om[p] * om[p] * wy
        _mass_matrix(md, pos, ang, Jv, cols, D)
        _bias(md, pos, ang, om, vo, ao, Jv, cols, C, G)
        for j in range(n):
            acc_term = 0.0
            for k in range(n):
                acc_term += D[j, k] * am[k]
            rhs[j] = acc_term + C[j] + G[j]
        for j in range(m):
            rhs[md.act_joint[j]] -= um[j]
        for p in range(md.npts):
            lt = lm[2 * p]; ln = lm[2 * p + 1]
            if lt != 0.0 or ln != 0.0:
                _world_point(md, pos, ang, md.cp_body[p], md.cp_off[p, 0], md.cp_off[p, 1], &wx, &wy)
                _sd_point(env, wx, wy, &dd, &tx, &ty, &nx, &ny, &sj)
                _point_jac(md, pos, ang, md.cp_body[p], md.cp_off[p, 0], md.cp_off[p, 1], Jv)
                for j in range(n):
                    rhs[j] -= (lt * tx + ln * nx) * Jv[0, j] + (lt * ty + ln * ny) * Jv[1, j]
        for j in range(n):
            eq[doff + i * n + j] = rhs[j]

    off = 1 + (nd - 1) * blk
    f = kinetic_energy(md_obj, np.asarray(zv[off:off + n]), np.asarray(zv[off + n:off + 2 * n]))
    return f, c_eq, c_ineq
