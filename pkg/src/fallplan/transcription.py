"""Direct-collocation transcription of a fixed-mode trajectory optimization.

Decision vector: ``z = [h, knot_0, ..., knot_{Nd-1}]`` with each knot block
``(q, qd, u, lam)``.  States follow cubic splines (positions matched to q, qd
at the knots; velocities matched to qd and the knot accelerations), controls
and forces are piecewise linear, and the dynamics residual is pinned to zero
at every interval midpoint.  The objective is the kinetic energy at the final
knot.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

import numpy as np

from .contact import ContactMode
from .core import Recipe, kernels
from .model import Environment, PlanarRobotModel, RobotState

KINDS = ("self_motion", "add_contact", "remove_contact")


class InfeasibleSpec(Exception):
    """Start state violates the trajectory mode's kinematic constraints."""


@dataclass(frozen=True)
class TransitionSpec:
    """One trajectory optimization: hold sigma_i, end ready for sigma_j."""

    start: RobotState
    sigma_i: ContactMode
    sigma_j: ContactMode
    kind: str

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        di = self.sigma_j.count() - self.sigma_i.count()
        want = {"self_motion": 0, "add_contact": 1, "remove_contact": -1}[self.kind]
        if di != want:
            raise ValueError(f"kind {self.kind} inconsistent with mode counts ({di:+d})")

    def changed_limb(self) -> int | None:
        for i, (a, b) in enumerate(zip(self.sigma_i.active, self.sigma_j.active)):
            if a != b:
                return i
        return None


def cubic_state_spline(x_i, x_ip1, xdd_i, xdd_ip1, h):
    """Per-coordinate cubic coefficients (a, b, c, d) over s in [0, 1].

    Returns (pos, vel): position cubics matching (q, qd) and velocity cubics
    matching (qd, qdd) at both knots.  Time derivative = d/ds / h.
    """
    n = len(x_i) // 2
    q0, v0 = x_i[:n], x_i[n:]
    q1, v1 = x_ip1[:n], x_ip1[n:]

    def hermite(p0, d0, p1, d1):
        dp = p1 - p0
        a = -2.0 * dp + (d0 + d1) * h
        b = 3.0 * dp - (2.0 * d0 + d1) * h
        return np.stack([a, b, d0 * h, p0], axis=-1)

    return hermite(q0, v0, q1, v1), hermite(v0, xdd_i, v1, xdd_ip1)


def eval_cubic(coeffs, s):
    a, b, c, d = coeffs[..., 0], coeffs[..., 1], coeffs[..., 2], coeffs[..., 3]
    return ((a * s + b) * s + c) * s + d


def eval_cubic_deriv(coeffs, s, h):
    a, b, c = coeffs[..., 0], coeffs[..., 1], coeffs[..., 2]
    return ((3.0 * a * s + 2.0 * b) * s + c) / h


def knot_acceleration(model: PlanarRobotModel, env: Environment, x, u, lam):
    """q̈ from the equation of motion, exactly satisfied at the knot."""
    n = model.n
    x = np.asarray(x, float)
    return model.accel(env, x[:n], x[n:], u, lam)


def midpoint_defect(model: PlanarRobotModel, env: Environment, knot_i, knot_ip1, h):
    """Dynamics residual at the interval midpoint (s = 0.5)."""
    n = model.n
    (x0, u0, l0), (x1, u1, l1) = knot_i, knot_ip1
    x0 = np.asarray(x0, float)
    x1 = np.asarray(x1, float)
    a0 = knot_acceleration(model, env, x0, u0, l0)
    a1 = knot_acceleration(model, env, x1, u1, l1)
    q0, v0, q1, v1 = x0[:n], x0[n:], x1[:n], x1[n:]
    qm = 0.5 * (q0 + q1) + h * (v0 - v1) / 8.0
    vm = 0.5 * (v0 + v1) + h * (a0 - a1) / 8.0
    am = 1.5 * (v1 - v0) / h - 0.25 * (a0 + a1)
    um = 0.5 * (np.asarray(u0) + np.asarray(u1))
    lm = 0.5 * (np.asarray(l0) + np.asarray(l1))
    D = model.mass_matrix(qm)
    C, G = model.bias_terms(qm, vm)
    r = D @ am + C + G
    r[model.arrays.act_joint] -= um
    J = model.contact_jacobian(qm, env)
    r -= J.T @ lm
    return r


@dataclass
class Layout:
    """Index map of the decision vector."""

    nd: int
    n: int
    m: int
    l: int

    @property
    def blk(self) -> int:
        return 2 * self.n + self.m + self.l

    @property
    def size(self) -> int:
        return 1 + self.nd * self.blk

    def col(self, k: int, slot: int) -> int:
        return 1 + k * self.blk + slot

    def q(self, k):
        o = 1 + k * self.blk
        return slice(o, o + self.n)

    def qd(self, k):
        o = 1 + k * self.blk + self.n
        return slice(o, o + self.n)

    def u(self, k):
        o = 1 + k * self.blk + 2 * self.n
        return slice(o, o + self.m)

    def lam(self, k):
        o = 1 + k * self.blk + 2 * self.n + self.m
        return slice(o, o + self.l)

    def pack(self, h, qs, qds, us, lams):
        z = np.empty(self.size)
        z[0] = h
        for k in range(self.nd):
            z[self.q(k)] = qs[k]
            z[self.qd(k)] = qds[k]
            z[self.u(k)] = us[k]
            z[self.lam(k)] = lams[k]
        return z

    def unpack(self, z):
        qs = np.stack([z[self.q(k)] for k in range(self.nd)])
        qds = np.stack([z[self.qd(k)] for k in range(self.nd)])
        us = np.stack([z[self.u(k)] for k in range(self.nd)])
        lams = np.stack([z[self.lam(k)] for k in range(self.nd)])
        return z[0], qs, qds, us, lams


@dataclass
class TranscriptionOptions:
    eps_contact: float = 0.025
    eps_internal: float | None = None
    t_min: float = 0.25
    t_max: float = 3.5
    cone_margin: float = 1e-4
    fd_step: float = 1e-6
    start_tol: float = 1e-6


class TranscribedNLP:
    """Constraint set and callbacks of one fixed-mode trajectory NLP."""

    def __init__(self, model: PlanarRobotModel, env: Environment,
                 spec: TransitionSpec, nd: int, options: TranscriptionOptions | None = None):
        if nd < 2:
            raise ValueError("need at least two knots")
        self.model = model
        self.env = env
        self.spec = spec
        self.nd = nd
        self.opt = options or TranscriptionOptions()
        self.layout = Layout(nd, model.n, model.m, model.l)

        self._validate_start()
        self._build_recipe()
        self._build_bounds()
        self._build_labels()
        self._build_dependency_maps()

    # -- construction ----------------------------------------------------

    def _validate_start(self):
        md, env, spec = self.model, self.env, self.spec
        pts = spec.sigma_i.active_points(md)
        if len(pts) == 0:
            return
        phi = md.signed_distances(env, spec.start.q)[pts]
        J = md.contact_jacobian(spec.start.q, env)
        rows = np.stack([J[2 * p + r] for p in pts for r in (0, 1)])
        vel = rows @ spec.start.qd
        worst = max(np.max(np.abs(phi)), np.max(np.abs(vel)))
        if worst > self.opt.start_tol:
            raise InfeasibleSpec(
                f"start state violates mode {spec.sigma_i.active} kinematics by {worst:.2e}")

    def _build_recipe(self):
        md, spec, opt = self.model, self.spec, self.opt
        act = spec.sigma_i.active_points(md)
        inact = spec.sigma_i.inactive_points(md)
        phi0 = md.signed_distances(self.env, spec.start.q) if md.npts else np.zeros(0)

        added = set()
        if spec.kind == "add_contact":
            limb = spec.changed_limb()
            added = set(int(p) for p in md.limb_points[md.limbs[limb]])
        eps = np.empty(len(inact))
        for i, p in enumerate(inact):
            if int(p) in added:
                eps[i] = 0.0
            else:
                eps[i] = min(opt.eps_contact, max(0.0, phi0[p]))
        term = np.array(sorted(added), dtype=np.int32)

        skip = np.zeros(0, dtype=np.int32)
        if spec.kind == "remove_contact":
            limb = spec.changed_limb()
            skip = np.array(sorted(md.limb_points[md.limbs[limb]]), dtype=np.int32)

        eps_int = np.full(md.nint, opt.eps_internal if opt.eps_internal is not None
                          else opt.eps_contact)
        # internal points may start below clearance too (e.g. deep crouch)
        if md.nint:
            di0 = md.clearance_distances(self.env, spec.start.q)
            eps_int = np.minimum(eps_int, np.maximum(0.0, di0))

        # non-redundant holonomic rows: one representative point per limb link,
        # plus the link angular rate when several points share the link
        hol_pts, hol_bodies = [], []
        for limb, on in zip(md.limbs, spec.sigma_i.active):
            if not on:
                continue
            by_link: dict[int, list[int]] = {}
            for p in md.limb_points[limb]:
                by_link.setdefault(md.contact_points[p].link, []).append(p)
            for link, pts_on_link in sorted(by_link.items()):
                hol_pts.append(min(pts_on_link))
                if len(pts_on_link) > 1:
                    hol_bodies.append(link)

        self.recipe = Recipe(
            nd=self.nd, act=act, inact=inact, eps_inact=eps,
            eps_internal=eps_int, term_pts=term,
            hol_pts=np.array(hol_pts, dtype=np.int32),
            hol_bodies=np.array(hol_bodies, dtype=np.int32),
            cone_margin=opt.cone_margin, skip_cone_last=skip,
        )
        self.n_eq, self.n_ineq = self.recipe.counts(md)

    def _build_bounds(self):
        md, lay, spec, opt = self.model, self.layout, self.spec, self.opt
        lb = np.empty(lay.size)
        ub = np.empty(lay.size)
        lb[0] = opt.t_min / (self.nd - 1)
        ub[0] = opt.t_max / (self.nd - 1)
        act = set(int(p) for p in self.recipe.act)
        for k in range(self.nd):
            lb[lay.q(k)], ub[lay.q(k)] = md.q_min, md.q_max
            lb[lay.qd(k)], ub[lay.qd(k)] = -md.qd_max, md.qd_max
            lb[lay.u(k)], ub[lay.u(k)] = -md.u_max, md.u_max
            lam_lo = np.empty(md.l)
            lam_hi = np.empty(md.l)
            for p in range(md.npts):
                if p in act:
                    lam_lo[2 * p], lam_hi[2 * p] = -md.force_bound, md.force_bound
                    lam_lo[2 * p + 1], lam_hi[2 * p + 1] = 0.0, md.force_bound
                else:
                    lam_lo[2 * p:2 * p + 2] = 0.0
                    lam_hi[2 * p:2 * p + 2] = 0.0
            lb[lay.lam(k)], ub[lay.lam(k)] = lam_lo, lam_hi
        # pin the start state
        lb[lay.q(0)] = ub[lay.q(0)] = spec.start.q
        lb[lay.qd(0)] = ub[lay.qd(0)] = spec.start.qd
        # removed limb bears no force at the final knot
        if spec.kind == "remove_contact":
            for p in self.recipe.skip_cone_last:
                s = lay.lam(self.nd - 1).start
                lb[s + 2 * p:s + 2 * p + 2] = 0.0
                ub[s + 2 * p:s + 2 * p + 2] = 0.0
        self.lb, self.ub = lb, ub

    def _build_labels(self):
        md = self.model
        rc = self.recipe
        eq, ineq = [], []
        for k in range(1, self.nd):
            eq += [f"phi[k={k},pt={p}]" for p in rc.act]
            for p in rc.hol_pts:
                eq += [f"hol_t[k={k},pt={p}]", f"hol_n[k={k},pt={p}]"]
            eq += [f"hol_w[k={k},link={b}]" for b in rc.hol_bodies]
        for i in range(self.nd - 1):
            eq += [f"defect[i={i},dof={d}]" for d in range(md.n)]
        eq += [f"term_phi[pt={p}]" for p in rc.term_pts]
        skip = set(int(p) for p in rc.skip_cone_last)
        for k in range(self.nd):
            for p in rc.act:
                if k == self.nd - 1 and int(p) in skip:
                    continue
                ineq.append(f"cone[k={k},pt={p}]")
        for k in range(1, self.nd):
            ineq += [f"clear[k={k},pt={p}]" for p in rc.inact]
            ineq += [f"internal[k={k},ip={p}]" for p in range(md.nint)]
        assert len(eq) == self.n_eq and len(ineq) == self.n_ineq
        self.labels_eq, self.labels_ineq = eq, ineq

    def _build_dependency_maps(self):
        """Rows whose value depends on each knot's variables (for colored FD)."""
        md, rc, nd = self.model, self.recipe, self.nd
        ka = len(rc.act)
        kr = rc.eq_knot_rows
        n = md.n
        eq_rows = [[] for _ in range(nd)]
        ineq_rows = [[] for _ in range(nd)]
        for k in range(1, nd):
            base = (k - 1) * kr
            eq_rows[k].extend(range(base, base + kr))
        doff = (nd - 1) * kr
        for i in range(nd - 1):
            rows = range(doff + i * n, doff + (i + 1) * n)
            eq_rows[i].extend(rows)
            eq_rows[i + 1].extend(rows)
        toff = doff + (nd - 1) * n
        eq_rows[nd - 1].extend(range(toff, toff + len(rc.term_pts)))

        g = 0
        skip = set(int(p) for p in rc.skip_cone_last)
        for k in range(nd):
            cnt = ka - (len(skip) if k == nd - 1 else 0)
            ineq_rows[k].extend(range(g, g + cnt))
            g += cnt
        per = len(rc.inact) + md.nint
        for k in range(1, nd):
            ineq_rows[k].extend(range(g, g + per))
            g += per
        self._eq_rows_of_knot = [np.array(r, dtype=np.intp) for r in eq_rows]
        self._ineq_rows_of_knot = [np.array(r, dtype=np.intp) for r in ineq_rows]
        n_defect = (nd - 1) * n
        self._eq_rows_of_h = np.arange(doff, doff + n_defect, dtype=np.intp)

    # -- evaluation -------------------------------------------------------

    def evaluate(self, z: np.ndarray):
        """(objective, equality rows, inequality rows)."""
        return kernels.eval_all(self.model.arrays, self.env.arrays, self.recipe,
                                np.asarray(z, float))

    def objective(self, z: np.ndarray) -> float:
        lay = self.layout
        qf = z[lay.q(self.nd - 1)]
        vf = z[lay.qd(self.nd - 1)]
        return kernels.kinetic_energy(self.model.arrays, qf, vf)

    def jacobians(self, z: np.ndarray):
        """(grad_f, J_eq, J_ineq) by colored central differences.

        Knots two apart never share a constraint row, so even and odd knots
        are perturbed together; each pass costs one pair of evaluations per
        variable slot.  Step is relative-scaled.
        """
        z = np.asarray(z, float)
        lay = self.layout
        nd = self.nd
        step = self.opt.fd_step
        grad_f = np.zeros(lay.size)
        Jeq = np.zeros((self.n_eq, lay.size))
        Jineq = np.zeros((self.n_ineq, lay.size))
        free = self.ub > self.lb

        for color in (0, 1):
            knots = list(range(color, nd, 2))
            for slot in range(lay.blk):
                cols = [lay.col(k, slot) for k in knots]
                deltas = {}
                zp = z.copy()
                zm = z.copy()
                for k, c in zip(knots, cols):
                    if not free[c]:
                        continue
                    d = step * max(1.0, abs(z[c]))
                    deltas[k] = (c, d)
                    zp[c] += d
                    zm[c] -= d
                if not deltas:
                    continue
                fp, eqp, inp_ = self.evaluate(zp)
                fm, eqm, inm = self.evaluate(zm)
                for k, (c, d) in deltas.items():
                    re = self._eq_rows_of_knot[k]
                    ri = self._ineq_rows_of_knot[k]
                    Jeq[re, c] = (eqp[re] - eqm[re]) / (2 * d)
                    Jineq[ri, c] = (inp_[ri] - inm[ri]) / (2 * d)
                    if k == nd - 1 and slot < 2 * lay.n:
                        grad_f[c] = (fp - fm) / (2 * d)

        if free[0]:
            d = step * max(1.0, abs(z[0]))
            zp = z.copy()
            zm = z.copy()
            zp[0] += d
            zm[0] -= d
            _, eqp, _ = self.evaluate(zp)
            _, eqm, _ = self.evaluate(zm)
            rows = self._eq_rows_of_h
            Jeq[rows, 0] = (eqp[rows] - eqm[rows]) / (2 * d)
        return grad_f, Jeq, Jineq

    def variable_scale(self) -> np.ndarray:
        rng = self.ub - self.lb
        s = np.where(np.isfinite(rng) & (rng > 0), rng / 4.0, 1.0)
        return np.clip(s, 1e-3, None)

    # -- knot helpers ------------------------------------------------------

    def knot_accelerations(self, z: np.ndarray) -> np.ndarray:
        lay = self.layout
        out = np.empty((self.nd, self.model.n))
        for k in range(self.nd):
            x = np.concatenate([z[lay.q(k)], z[lay.qd(k)]])
            out[k] = knot_acceleration(self.model, self.env, x, z[lay.u(k)], z[lay.lam(k)])
        return out

    def trajectory(self, z: np.ndarray, seed: bool = False) -> "CollocationTrajectory":
        h, qs, qds, us, lams = self.layout.unpack(np.asarray(z, float))
        return CollocationTrajectory(
            h=float(h), qs=qs, qds=qds, us=us, lams=lams,
            mode=self.spec.sigma_i, seed=seed,
        )


def objective(model: PlanarRobotModel, traj: "CollocationTrajectory") -> float:
    """Terminal kinetic energy, the quantity every solve minimizes."""
    return kernels.kinetic_energy(model.arrays, traj.qs[-1], traj.qds[-1])


@dataclass
class CollocationTrajectory:
    """Knot states/controls/forces plus the uniform timestep.

    ``h = 0`` with a single knot encodes the trivial zero-duration trajectory
    of an already stationary node.
    """

    h: float
    qs: np.ndarray
    qds: np.ndarray
    us: np.ndarray
    lams: np.ndarray
    mode: ContactMode | None = None
    seed: bool = False

    def __post_init__(self):
        self.qs = np.atleast_2d(np.asarray(self.qs, float))
        self.qds = np.atleast_2d(np.asarray(self.qds, float))
        self.us = np.atleast_2d(np.asarray(self.us, float))
        self.lams = np.atleast_2d(np.asarray(self.lams, float))
        if self.h < 0:
            raise ValueError("timestep must be nonnegative")
        if len(self.qs) >= 2 and self.h == 0:
            raise ValueError("multi-knot trajectory needs h > 0")

    @property
    def nd(self) -> int:
        return len(self.qs)

    @property
    def duration(self) -> float:
        return self.h * (self.nd - 1)

    def times(self) -> np.ndarray:
        return self.h * np.arange(self.nd)

    def start_state(self) -> RobotState:
        return RobotState(self.qs[0], self.qds[0])

    def end_state(self) -> RobotState:
        return RobotState(self.qs[-1], self.qds[-1])

    def splines(self, model: PlanarRobotModel, env: Environment):
        """Per-interval (position, velocity) cubic coefficient arrays."""
        acc = np.stack([
            knot_acceleration(model, env,
                              np.concatenate([self.qs[k], self.qds[k]]),
                              self.us[k], self.lams[k])
            for k in range(self.nd)
        ])
        pos, vel = [], []
        for i in range(self.nd - 1):
            p, v = cubic_state_spline(
                np.concatenate([self.qs[i], self.qds[i]]),
                np.concatenate([self.qs[i + 1], self.qds[i + 1]]),
                acc[i], acc[i + 1], self.h)
            pos.append(p)
            vel.append(v)
        return np.array(pos), np.array(vel), acc

    def sample(self, model: PlanarRobotModel, env: Environment, ts: np.ndarray):
        """Spline states and linear inputs at arbitrary times within [0, T]."""
        ts = np.asarray(ts, float)
        if self.nd == 1:
            k = np.zeros(len(ts), dtype=int)
            return (np.repeat(self.qs, len(ts), 0), np.repeat(self.qds, len(ts), 0),
                    np.repeat(self.us, len(ts), 0), np.repeat(self.lams, len(ts), 0))
        pos, vel, _ = self.splines(model, env)
        q = np.empty((len(ts), self.qs.shape[1]))
        qd = np.empty_like(q)
        u = np.empty((len(ts), self.us.shape[1]))
        lam = np.empty((len(ts), self.lams.shape[1]))
        for j, t in enumerate(ts):
            i = min(int(np.floor(t / self.h)), self.nd - 2)
            i = max(i, 0)
            s = np.clip((t - i * self.h) / self.h, 0.0, 1.0)
            q[j] = eval_cubic(pos[i], s)
            qd[j] = eval_cubic(vel[i], s)
            u[j] = (1 - s) * self.us[i] + s * self.us[i + 1]
            lam[j] = (1 - s) * self.lams[i] + s * self.lams[i + 1]
        return q, qd, u, lam

    # -- serialization -----------------------------------------------------

    def to_csv(self) -> str:
        """One row per knot: t, q..., qd..., u..., lam... (documented order)."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        n, m, l = self.qs.shape[1], self.us.shape[1], self.lams.shape[1]
        hdr = (["t"] + [f"q{i}" for i in range(n)] + [f"qd{i}" for i in range(n)]
               + [f"u{i}" for i in range(m)] + [f"lam{i}" for i in range(l)])
        w.writerow(hdr)
        for k, t in enumerate(self.times()):
            row = [t, *self.qs[k], *self.qds[k], *self.us[k], *self.lams[k]]
            w.writerow([f"{v:.17g}" for v in row])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, n: int, m: int, l: int) -> "CollocationTrajectory":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or rows[0][:1] != ["t"]:
            raise ValueError("trajectory CSV must start with a 't' header row")
        want = 1 + 2 * n + m + l
        data = []
        for r in rows[1:]:
            if len(r) != want:
                raise ValueError(f"row has {len(r)} columns, expected {want}")
            data.append([float(v) for v in r])
        arr = np.array(data)
        if len(arr) == 0:
            raise ValueError("trajectory CSV has no knots")
        ts = arr[:, 0]
        h = float(ts[1] - ts[0]) if len(ts) > 1 else 0.0
        return cls(h=h, qs=arr[:, 1:1 + n], qds=arr[:, 1 + n:1 + 2 * n],
                   us=arr[:, 1 + 2 * n:1 + 2 * n + m], lams=arr[:, 1 + 2 * n + m:])

    def to_json_dict(self, model: PlanarRobotModel | None = None,
                     env: Environment | None = None) -> dict:
        d = {
            "h": self.h,
            "seed": self.seed,
            "knots": [
                {"t": float(k * self.h), "q": self.qs[k].tolist(), "qd": self.qds[k].tolist(),
                 "u": self.us[k].tolist(), "lam": self.lams[k].tolist()}
                for k in range(self.nd)
            ],
        }
        if self.mode is not None:
            d["mode"] = list(self.mode.active)
        if model is not None and env is not None and self.nd > 1:
            pos, vel, acc = self.splines(model, env)
            d["spline"] = {
                "position": pos.tolist(),
                "velocity": vel.tolist(),
                "knot_accelerations": acc.tolist(),
            }
        return d

    @classmethod
    def from_json_dict(cls, d: dict) -> "CollocationTrajectory":
        ks = d["knots"]
        return cls(
            h=float(d["h"]),
            qs=[k["q"] for k in ks], qds=[k["qd"] for k in ks],
            us=[k["u"] for k in ks], lams=[k["lam"] for k in ks],
            mode=ContactMode(tuple(d["mode"])) if "mode" in d else None,
            seed=bool(d.get("seed", False)),
        )

    def to_json(self, model=None, env=None) -> str:
        return json.dumps(self.to_json_dict(model, env), indent=1, sort_keys=True)
