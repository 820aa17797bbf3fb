"""Pure numpy reference implementation of the kernel API.

Mirrored by the Cython backend `_fast`; keep the two numerically identical.
"""

from __future__ import annotations

import numpy as np

from .arrays import EnvArrays, ModelArrays, Recipe

BACKEND = "python"


def fk(md: ModelArrays, q: np.ndarray):
    """Body frame origins (nb,2) and absolute angles (nb,)."""
    pos = np.empty((md.nb, 2))
    ang = np.empty(md.nb)
    pos[0] = q[0:2]
    ang[0] = q[2]
    for i in range(1, md.nb):
        p = md.parent[i]
        c, s = np.cos(ang[p]), np.sin(ang[p])
        ax, ay = md.attach[i]
        pos[i, 0] = pos[p, 0] + c * ax - s * ay
        pos[i, 1] = pos[p, 1] + s * ax + c * ay
        ang[i] = ang[p] + md.mount[i] + q[3 + md.joint_of_body[i]]
    return pos, ang


def _body_rates(md, qd):
    """Angular velocity per body."""
    om = np.empty(md.nb)
    om[0] = qd[2]
    for i in range(1, md.nb):
        om[i] = om[md.parent[i]] + qd[3 + md.joint_of_body[i]]
    return om


def _world_point(pos, ang, body, off):
    c, s = np.cos(ang[body]), np.sin(ang[body])
    return np.array([pos[body, 0] + c * off[0] - s * off[1],
                     pos[body, 1] + s * off[0] + c * off[1]])


def points_world(md: ModelArrays, q: np.ndarray, body: np.ndarray, off: np.ndarray):
    pos, ang = fk(md, q)
    out = np.empty((len(body), 2))
    for k in range(len(body)):
        out[k] = _world_point(pos, ang, body[k], off[k])
    return out


def _point_jacobian_into(md, pos, ang, body, off, J):
    """World-velocity Jacobian (2,n) of a point fixed on `body`."""
    J[:] = 0.0
    w = _world_point(pos, ang, body, off)
    J[0, 0] = 1.0
    J[1, 1] = 1.0
    J[0, 2] = -(w[1] - pos[0, 1])
    J[1, 2] = w[0] - pos[0, 0]
    for t in range(md.dof_count[body]):
        col = md.dof_list[body, t]
        anchor = md.joint_body[col - 3]
        J[0, col] = -(w[1] - pos[anchor, 1])
        J[1, col] = w[0] - pos[anchor, 0]
    return w


def point_jacobians(md: ModelArrays, q: np.ndarray, body: np.ndarray, off: np.ndarray):
    pos, ang = fk(md, q)
    J = np.zeros((len(body), 2, md.n))
    for k in range(len(body)):
        _point_jacobian_into(md, pos, ang, body[k], off[k], J[k])
    return J


def mass_matrix(md: ModelArrays, q: np.ndarray):
    pos, ang = fk(md, q)
    n = md.n
    D = np.zeros((n, n))
    Jv = np.zeros((2, n))
    for i in range(md.nb):
        rc = _point_jacobian_into(md, pos, ang, i, md.com[i], Jv)
        cols = [0, 1, 2] + [int(md.dof_list[i, t]) for t in range(md.dof_count[i])]
        sub = Jv[:, cols]
        Dm = md.mass[i] * (sub.T @ sub)
        # Jw has unit entries on the same rotational columns (skip x, z)
        rcols = cols[2:]
        for a, ca in enumerate(cols):
            for b, cb in enumerate(cols):
                D[ca, cb] += Dm[a, b]
        for ca in rcols:
            for cb in rcols:
                D[ca, cb] += md.inertia[i]
        del rc
    return D


def _vel_pass(md, q, qd):
    """Forward pass: body origin velocity/ZA acceleration with qddot = 0."""
    pos, ang = fk(md, q)
    om = _body_rates(md, qd)
    vo = np.empty((md.nb, 2))
    ao = np.empty((md.nb, 2))
    vo[0] = qd[0:2]
    ao[0] = 0.0
    for i in range(1, md.nb):
        p = md.parent[i]
        c, s = np.cos(ang[p]), np.sin(ang[p])
        ax, ay = md.attach[i]
        wx = c * ax - s * ay
        wy = s * ax + c * ay
        vo[i, 0] = vo[p, 0] - om[p] * wy
        vo[i, 1] = vo[p, 1] + om[p] * wx
        ao[i, 0] = ao[p, 0] - om[p] * om[p] * wx
        ao[i, 1] = ao[p, 1] - om[p] * om[p] * wy
    return pos, ang, om, vo, ao


def bias_terms(md: ModelArrays, q: np.ndarray, qd: np.ndarray):
    """Velocity-product vector C(q,qd) and gravity vector G(q) of the dynamics."""
    pos, ang, om, vo, ao = _vel_pass(md, q, qd)
    n = md.n
    C = np.zeros(n)
    G = np.zeros(n)
    Jv = np.zeros((2, n))
    for i in range(md.nb):
        c, s = np.cos(ang[i]), np.sin(ang[i])
        ox, oy = md.com[i]
        rx = c * ox - s * oy
        ry = s * ox + c * oy
        # CoM acceleration with qddot = 0 (angular accelerations vanish in the plane)
        acx = ao[i, 0] - om[i] * om[i] * rx
        acy = ao[i, 1] - om[i] * om[i] * ry
        _point_jacobian_into(md, pos, ang, i, md.com[i], Jv)
        cols = [0, 1, 2] + [int(md.dof_list[i, t]) for t in range(md.dof_count[i])]
        mi = md.mass[i]
        for col in cols:
            C[col] += mi * (Jv[0, col] * acx + Jv[1, col] * acy)
            G[col] += mi * md.gravity * Jv[1, col]
    return C, G


def kinetic_energy(md: ModelArrays, q: np.ndarray, qd: np.ndarray) -> float:
    D = mass_matrix(md, q)
    return 0.5 * float(qd @ D @ qd)


def signed_distances(env: EnvArrays, pts: np.ndarray):
    """Per point: signed distance, tangent, normal, index of the governing segment.

    Takes the minimum signed distance over segments (lowest index on ties);
    the returned frame is the governing segment's (tangent, outward normal).
    """
    k = len(pts)
    d = np.empty(k)
    tang = np.empty((k, 2))
    nrm = np.empty((k, 2))
    seg = np.empty(k, dtype=np.int32)
    for i in range(k):
        best = np.inf
        bj = 0
        for j in range(env.nseg):
            ax, ay = env.a[j]
            bx, by = env.b[j]
            ex, ey = bx - ax, by - ay
            px, py = pts[i, 0] - ax, pts[i, 1] - ay
            t = (px * ex + py * ey) / (ex * ex + ey * ey)
            t = min(1.0, max(0.0, t))
            dx, dy = px - t * ex, py - t * ey
            dist = np.hypot(dx, dy)
            sd = dist if (dx * env.nrm[j, 0] + dy * env.nrm[j, 1]) >= 0.0 else -dist
            if sd < best:
                best = sd
                bj = j
        d[i] = best
        seg[i] = bj
        tang[i] = env.tang[bj]
        nrm[i] = env.nrm[bj]
    return d, tang, nrm, seg


def contact_jacobian(md: ModelArrays, env: EnvArrays, q: np.ndarray):
    """Full (l, n) contact Jacobian, rows (tangential, normal) per point."""
    pts = points_world(md, q, md.cp_body, md.cp_off)
    _, tang, nrm, _ = signed_distances(env, pts)
    Jp = point_jacobians(md, q, md.cp_body, md.cp_off)
    J = np.empty((md.l, md.n))
    for p in range(md.npts):
        J[2 * p] = tang[p] @ Jp[p]
        J[2 * p + 1] = nrm[p] @ Jp[p]
    return J


def _spd_solve(D, rhs):
    L = np.linalg.cholesky(D)
    y = np.linalg.solve(L, rhs)
    return np.linalg.solve(L.T, y)


def accel(md: ModelArrays, env: EnvArrays, q, qd, u, lam):
    """Knot acceleration from the equation of motion: D qdd = J^T lam + B u - C - G."""
    D = mass_matrix(md, q)
    C, G = bias_terms(md, q, qd)
    rhs = -C - G
    for j in range(md.m):
        rhs[md.act_joint[j]] += u[j]
    if md.npts and np.any(lam):
        J = contact_jacobian(md, env, q)
        rhs += J.T @ lam
    return _spd_solve(D, rhs)


def _knot_view(md, z, k):
    n, m, l = md.n, md.m, md.l
    off = 1 + k * (2 * n + m + l)
    return (z[off:off + n], z[off + n:off + 2 * n],
            z[off + 2 * n:off + 2 * n + m], z[off + 2 * n + m:off + 2 * n + m + l])


def eval_all(md: ModelArrays, env: EnvArrays, rc: Recipe, z: np.ndarray):
    """Objective, equality rows and inequality rows of the transcribed NLP."""
    nd, n = rc.nd, md.n
    ka, kb, kt = len(rc.act), len(rc.inact), len(rc.term_pts)
    h = z[0]
    n_eq, n_ineq = rc.counts(md)
    c_eq = np.empty(n_eq)
    c_ineq = np.empty(n_ineq)

    accels = np.empty((nd, n))
    mu2 = env.mu * env.mu
    e = 0
    g = 0
    skip_last = set(int(p) for p in rc.skip_cone_last)

    for k in range(nd):
        q, qd, u, lam = _knot_view(md, z, k)
        pos, ang, om, vo, ao = _vel_pass(md, q, qd)
        del ao
        # contact point positions / frames
        if md.npts:
            cpts = np.empty((md.npts, 2))
            for p in range(md.npts):
                cpts[p] = _world_point(pos, ang, md.cp_body[p], md.cp_off[p])
            dist, tang, nrm, _ = signed_distances(env, cpts)
        # dynamics at the knot
        accels[k] = accel(md, env, q, qd, u, lam)
        # phi / holonomic equality rows (knots 1..nd-1)
        if k >= 1:
            for idx, p in enumerate(rc.act):
                c_eq[e + idx] = dist[p]
            e += ka
            for idx, p in enumerate(rc.hol_pts):
                b = md.cp_body[p]
                w = cpts[p]
                vx = vo[b, 0] - om[b] * (w[1] - pos[b, 1])
                vy = vo[b, 1] + om[b] * (w[0] - pos[b, 0])
                c_eq[e + 2 * idx] = tang[p, 0] * vx + tang[p, 1] * vy
                c_eq[e + 2 * idx + 1] = nrm[p, 0] * vx + nrm[p, 1] * vy
            e += 2 * len(rc.hol_pts)
            for idx, b in enumerate(rc.hol_bodies):
                c_eq[e + idx] = om[b]
            e += len(rc.hol_bodies)
        # friction cone inequality rows
        for p in rc.act:
            if k == nd - 1 and int(p) in skip_last:
                continue
            lt, ln = lam[2 * p], lam[2 * p + 1]
            c_ineq[g] = mu2 * ln * ln - lt * lt - rc.cone_margin
            g += 1
        # clearance inequality rows (knots 1..nd-1)
        if k >= 1:
            for idx, p in enumerate(rc.inact):
                c_ineq[g + idx] = dist[p] - rc.eps_inact[idx]
            g += kb
            if md.nint:
                ipts = np.empty((md.nint, 2))
                for p in range(md.nint):
                    ipts[p] = _world_point(pos, ang, md.ip_body[p], md.ip_off[p])
                idist, _, _, _ = signed_distances(env, ipts)
                for p in range(md.nint):
                    c_ineq[g + p] = idist[p] - rc.eps_internal[p]
                g += md.nint
        # terminal contact rows for an added limb
        if k == nd - 1 and kt:
            base = (nd - 1) * rc.eq_knot_rows + (nd - 1) * n
            for idx, p in enumerate(rc.term_pts):
                c_eq[base + idx] = dist[p]

    # midpoint dynamics defects
    eoff = (nd - 1) * rc.eq_knot_rows
    for i in range(nd - 1):
        q0, v0, u0, l0 = _knot_view(md, z, i)
        q1, v1, u1, l1 = _knot_view(md, z, i + 1)
        a0, a1 = accels[i], accels[i + 1]
        qm = 0.5 * (q0 + q1) + h * (v0 - v1) / 8.0
        vm = 0.5 * (v0 + v1) + h * (a0 - a1) / 8.0
        am = 1.5 * (v1 - v0) / h - 0.25 * (a0 + a1)
        um = 0.5 * (u0 + u1)
        lm = 0.5 * (l0 + l1)
        D = mass_matrix(md, qm)
        C, G = bias_terms(md, qm, vm)
        r = D @ am + C + G
        for j in range(md.m):
            r[md.act_joint[j]] -= um[j]
        if md.npts and np.any(lm):
            J = contact_jacobian(md, env, qm)
            r -= J.T @ lm
        c_eq[eoff + i * n:eoff + (i + 1) * n] = r

    qf, vf, _, _ = _knot_view(md, z, nd - 1)
    f = kinetic_energy(md, qf, vf)
    return f, c_eq, c_ineq
