"""Initial-guess generation for the trajectory NLPs.

Seeds follow a fixed scheme: linearly decay the initial velocity to pick a
reference goal, project the goal onto the contact manifold, lay a parabolic
configuration spline through the knots, and fill controls/forces by a
least-squares fit of the equation of motion at each knot.  Durations are
swept from short to long until a solve is feasible.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .contact import ContactMode
from .model import Environment, PlanarRobotModel, RobotState
from .transcription import TranscribedNLP, TransitionSpec


class ProjectionFailed(Exception):
    """Goal projection onto the contact manifold did not converge."""


class NoSeedWorked(Exception):
    """Every duration in the sweep failed to produce a feasible solve."""

    def __init__(self, attempts: int):
        super().__init__(f"no feasible solve after {attempts} seed durations")
        self.attempts = attempts


@dataclass(frozen=True)
class SeedSchedule:
    """Uniform duration grid inclusive of both endpoints."""

    t_min: float
    t_max: float
    n_tot: int

    def __post_init__(self):
        if not (0.0 < self.t_min < self.t_max):
            raise ValueError("need 0 < t_min < t_max")
        if self.n_tot < 1:
            raise ValueError("need at least one duration")

    def durations(self) -> np.ndarray:
        if self.n_tot == 1:
            return np.array([self.t_min])
        return self.t_min + np.arange(self.n_tot) * (self.t_max - self.t_min) / (self.n_tot - 1)


def reference_goal(x0: RobotState, t: float):
    """Goal configuration assuming the initial velocity decays linearly to zero."""
    if t <= 0:
        raise ValueError("duration must be positive")
    qdd_ref = -x0.qd / t
    q_ref = x0.q + 0.5 * x0.qd * t
    return q_ref, qdd_ref


def project_to_manifold(model: PlanarRobotModel, env: Environment, q_ref: np.ndarray,
                        mode: ContactMode, eps_clearance: float = 0.0,
                        max_iter: int = 100, tol: float = 1e-8) -> np.ndarray:
    """Nearest configuration with the mode's contacts closed.

    Alternates Gauss-Newton feasibility steps with tangent-space steps back
    toward ``q_ref``; joint limits are enforced by clipping, and inactive
    points are pushed out to ``eps_clearance`` when violated.
    """
    q_ref = np.asarray(q_ref, float)
    q = np.clip(q_ref, model.q_min, model.q_max)
    pts = mode.active_points(model)
    inact = mode.inactive_points(model)

    def residual_rows(qq):
        phi = model.signed_distances(env, qq)
        J = model.contact_jacobian(qq, env)
        res = [phi[p] for p in pts]
        rows = [J[2 * p + 1] for p in pts]
        for p in inact:
            if phi[p] < eps_clearance - tol:
                res.append(phi[p] - eps_clearance)
                rows.append(J[2 * p + 1])
        if not res:
            return np.zeros(0), np.zeros((0, model.n))
        return np.array(res), np.stack(rows)

    def feasibility_phase(qq, budget):
        damp = 0.0
        prev = np.inf
        for _ in range(budget):
            res, rows = residual_rows(qq)
            if len(res) == 0 or np.max(np.abs(res)) <= tol:
                return qq, True
            rmax = np.max(np.abs(res))
            if rmax > 0.7 * prev:
                damp = 1e-8 if damp == 0.0 else damp * 100.0
            else:
                damp *= 0.01
            prev = rmax
            A = rows @ rows.T + damp * np.eye(len(res))
            sol = np.linalg.lstsq(A, res, rcond=None)[0]
            step = rows.T @ sol
            biggest = np.max(np.abs(step))
            if biggest > 0.5:
                step *= 0.5 / biggest
            qq = np.clip(qq - step, model.q_min, model.q_max)
        res, _ = residual_rows(qq)
        return qq, len(res) == 0 or np.max(np.abs(res)) <= tol

    q, ok = feasibility_phase(q, max_iter // 2)
    if not ok:
        res, _ = residual_rows(q)
        raise ProjectionFailed(f"projection stalled at residual {np.max(np.abs(res)):.2e}")

    # walk toward q_ref inside the tangent space, re-projecting after each step
    for _ in range(max_iter):
        res, rows = residual_rows(q)
        delta = q_ref - q
        if len(rows):
            sol = np.linalg.lstsq(rows @ rows.T, rows @ delta, rcond=None)[0]
            delta = delta - rows.T @ sol
        scale = np.max(np.abs(delta))
        if scale < 1e-10:
            break
        if scale > 0.2:
            delta *= 0.2 / scale
        improved = False
        s = 1.0
        for _ in range(8):
            q_try = np.clip(q + s * delta, model.q_min, model.q_max)
            q_try, ok = feasibility_phase(q_try, 20)
            if ok and np.linalg.norm(q_try - q_ref) < np.linalg.norm(q - q_ref) - 1e-14:
                q = q_try
                improved = True
                break
            s *= 0.5
        if not improved:
            break
    return q


def parabolic_seed(x0: RobotState, q_g: np.ndarray, t: float, nd: int):
    """Knot states of the quadratic path q0 -> q_g honoring (q0, qd0).

    Returns (qs, qds, qdds) at nd uniform times; exact evaluation of the
    parabola and its derivatives.
    """
    if t <= 0 or nd < 2:
        raise ValueError("need positive duration and at least two knots")
    a = 2.0 * (np.asarray(q_g) - x0.q - x0.qd * t) / (t * t)
    ts = np.linspace(0.0, t, nd)
    qs = x0.q[None, :] + x0.qd[None, :] * ts[:, None] + 0.5 * a[None, :] * ts[:, None] ** 2
    qds = x0.qd[None, :] + a[None, :] * ts[:, None]
    qdds = np.repeat(a[None, :], nd, axis=0)
    return qs, qds, qdds


def least_squares_inputs(model: PlanarRobotModel, env: Environment, q, qd, qdd,
                         mode: ContactMode):
    """Controls and active forces minimizing the dynamics residual at a knot.

    (u, lam_active) = pinv([B, J_sigma^T]) (D qdd + C + G); inactive forces
    are zero.  Returns (u, lam_full, residual).
    """
    q = np.asarray(q, float)
    D = model.mass_matrix(q)
    C, G = model.bias_terms(q, np.asarray(qd, float))
    lhs = D @ np.asarray(qdd, float) + C + G
    n = model.n
    pts = mode.active_points(model)
    B = np.zeros((n, model.m))
    for j, col in enumerate(model.arrays.act_joint):
        B[col, j] = 1.0
    if len(pts):
        J = model.contact_jacobian(q, env)
        rows = np.stack([J[2 * p + r] for p in pts for r in (0, 1)])
        A = np.hstack([B, rows.T])
    else:
        A = B
    sol, *_ = np.linalg.lstsq(A, lhs, rcond=None)
    u = sol[:model.m]
    lam = np.zeros(model.l)
    for i, p in enumerate(pts):
        lam[2 * p] = sol[model.m + 2 * i]
        lam[2 * p + 1] = sol[model.m + 2 * i + 1]
    residual = lhs - A @ sol
    return u, lam, residual


def clip_to_cone(lam: np.ndarray, mu: float) -> np.ndarray:
    """Clamp per-point forces onto the friction cone boundary."""
    out = lam.copy()
    for p in range(len(lam) // 2):
        lt, ln = out[2 * p], out[2 * p + 1]
        if ln < 0.0:
            ln = 0.0
        lt = np.clip(lt, -mu * ln, mu * ln)
        out[2 * p], out[2 * p + 1] = lt, ln
    return out


def build_seed(tnlp: TranscribedNLP, duration: float) -> np.ndarray:
    """Full decision-vector seed for one duration guess."""
    model, env, spec, nd = tnlp.model, tnlp.env, tnlp.spec, tnlp.nd
    x0 = spec.start
    q_ref, _ = reference_goal(x0, duration)
    try:
        q_g = project_to_manifold(model, env, q_ref, spec.sigma_j,
                                  eps_clearance=0.0)
    except ProjectionFailed:
        q_g = np.clip(q_ref, model.q_min, model.q_max)
    qs, qds, qdds = parabolic_seed(x0, q_g, duration, nd)
    force_mode = spec.sigma_j if spec.kind == "remove_contact" else spec.sigma_i
    us = np.empty((nd, model.m))
    lams = np.empty((nd, model.l))
    for k in range(nd):
        u, lam, _ = least_squares_inputs(model, env, qs[k], qds[k], qdds[k], force_mode)
        us[k] = np.clip(u, -model.u_max, model.u_max)
        lams[k] = clip_to_cone(lam, env.mu)
    h = duration / (nd - 1)
    z = tnlp.layout.pack(h, qs, qds, us, lams)
    return np.clip(z, tnlp.lb, tnlp.ub)


def seed_sweep(schedule: SeedSchedule, solve_fn: Callable[[float], object]):
    """First-feasible duration sweep.

    ``solve_fn(duration)`` returns any object with a truthy ``success``
    attribute (or None for failure); the first success is returned together
    with its duration.  Raises NoSeedWorked after exhausting the grid.
    """
    durations = schedule.durations()
    for i, t in enumerate(durations):
        result = solve_fn(float(t))
        ok = bool(getattr(result, "success", result is not None and result is not False))
        if result is not None and ok:
            return float(t), i, result
    raise NoSeedWorked(len(durations))
