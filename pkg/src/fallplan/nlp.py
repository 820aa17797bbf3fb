"""Constrained nonlinear programming behind a stable interface.

minimize f(z)  s.t.  c_eq(z) = 0,  c_ineq(z) >= 0,  lb <= z <= ub

The built-in engine is an augmented-Lagrangian outer loop (PHR multiplier
form for inequalities) around bound-constrained L-BFGS-B inner solves, with
per-variable scaling and per-row constraint scaling.  A second engine wraps
scipy's SLSQP behind the same interface so an external SQP can be swapped in
without touching callers.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import minimize


class NumericalFailure(Exception):
    """NaN or Inf encountered in an evaluation."""


@dataclass
class NLPProblem:
    """Problem data; the initial point is clipped into the bounds on intake."""

    dim: int
    objective: Callable[[np.ndarray], float]
    equality: Optional[Callable[[np.ndarray], np.ndarray]]
    inequality: Optional[Callable[[np.ndarray], np.ndarray]]
    lb: np.ndarray
    ub: np.ndarray
    x0: np.ndarray
    jacobians: Optional[Callable[[np.ndarray], tuple]] = None
    combined: Optional[Callable[[np.ndarray], tuple]] = None
    x_scale: Optional[np.ndarray] = None

    def __post_init__(self):
        self.lb = np.asarray(self.lb, float)
        self.ub = np.asarray(self.ub, float)
        if np.any(self.lb > self.ub):
            raise ValueError("lb must be <= ub elementwise")
        self.x0 = np.clip(np.asarray(self.x0, float), self.lb, self.ub)
        if self.x_scale is not None:
            self.x_scale = np.asarray(self.x_scale, float)

    def eval_all(self, z: np.ndarray):
        if self.combined is not None:
            f, ceq, cin = self.combined(z)
        else:
            f = self.objective(z)
            ceq = self.equality(z) if self.equality is not None else np.zeros(0)
            cin = self.inequality(z) if self.inequality is not None else np.zeros(0)
        return float(f), np.atleast_1d(np.asarray(ceq, float)), np.atleast_1d(np.asarray(cin, float))


@dataclass
class SolverOptions:
    feasibility_tol: float = 1e-6
    optimality_tol: float = 1e-4
    max_iterations: int = 3000          # total inner iterations across outer loops
    max_outer: int = 40
    inner_maxiter: int = 200
    rho0: float = 10.0
    rho_growth: float = 10.0
    rho_max: float = 1e12
    scale_constraints: bool = True
    engine: str = "auglag"
    fd_step: float = 1e-7               # used only when no Jacobian callback is given
    stall_outer: int = 4                # consecutive non-improving outers before Infeasible
    stall_factor: float = 0.5           # required per-outer violation reduction while infeasible
    multiplier_max: float = 1e10
    verbose: bool = False


@dataclass
class SolveReport:
    status: str                          # Optimal | Feasible | Infeasible | IterationLimit | NumericalFailure
    z: np.ndarray
    objective: float
    max_violation: float
    iterations: int
    wall_time: float
    stationarity: float = np.nan
    message: str = ""

    @property
    def success(self) -> bool:
        return self.status in ("Optimal", "Feasible")


def _finite_or_raise(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise NumericalFailure("non-finite value in evaluation")


class _ScaledProblem:
    """Variable- and constraint-scaled view of an NLPProblem."""

    def __init__(self, p: NLPProblem, opt: SolverOptions):
        self.p = p
        self.sx = p.x_scale if p.x_scale is not None else np.ones(p.dim)
        self.lb = p.lb / self.sx
        self.ub = p.ub / self.sx
        self.x0 = p.x0 / self.sx
        f0, ceq0, cin0 = p.eval_all(p.x0)
        _finite_or_raise([f0], ceq0, cin0)
        if opt.scale_constraints:
            self.seq = np.maximum(1.0, np.abs(ceq0))
            self.sin = np.maximum(1.0, np.abs(cin0))
        else:
            self.seq = np.ones(len(ceq0))
            self.sin = np.ones(len(cin0))
        self.n_eq = len(ceq0)
        self.n_in = len(cin0)
        self.nfev = 0
        self.fd_step = opt.fd_step

    def unscale(self, zs):
        return zs * self.sx

    def eval(self, zs):
        self.nfev += 1
        f, ceq, cin = self.p.eval_all(self.unscale(zs))
        _finite_or_raise([f], ceq, cin)
        return f, ceq / self.seq, cin / self.sin

    def jac(self, zs):
        z = self.unscale(zs)
        if self.p.jacobians is not None:
            gf, Jeq, Jin = self.p.jacobians(z)
        else:
            gf, Jeq, Jin = self._fd_jacobians(z)
        _finite_or_raise(gf, Jeq.ravel() if Jeq.size else Jeq, Jin.ravel() if Jin.size else Jin)
        gf = np.asarray(gf, float) * self.sx
        Jeq = (np.asarray(Jeq, float) * self.sx[None, :]) / self.seq[:, None] if self.n_eq else np.zeros((0, self.p.dim))
        Jin = (np.asarray(Jin, float) * self.sx[None, :]) / self.sin[:, None] if self.n_in else np.zeros((0, self.p.dim))
        return gf, Jeq, Jin

    def _fd_jacobians(self, z):
        d = self.p.dim
        f0, ceq0, cin0 = self.p.eval_all(z)
        gf = np.zeros(d)
        Jeq = np.zeros((len(ceq0), d))
        Jin = np.zeros((len(cin0), d))
        for k in range(d):
            step = self.fd_step * max(1.0, abs(z[k]))
            zp, zm = z.copy(), z.copy()
            zp[k] += step
            zm[k] -= step
            fp, eqp, inp_ = self.p.eval_all(zp)
            fm, eqm, inm = self.p.eval_all(zm)
            gf[k] = (fp - fm) / (2 * step)
            if len(ceq0):
                Jeq[:, k] = (eqp - eqm) / (2 * step)
            if len(cin0):
                Jin[:, k] = (inp_ - inm) / (2 * step)
        return gf, Jeq, Jin

    def violation_unscaled(self, ceq_s, cin_s):
        v = 0.0
        if len(ceq_s):
            v = max(v, float(np.max(np.abs(ceq_s * self.seq))))
        if len(cin_s):
            v = max(v, float(np.max(np.maximum(0.0, -cin_s * self.sin))))
        return v


def _restore_feasibility(sp: _ScaledProblem, zs: np.ndarray, feas_tol: float,
                         max_steps: int = 8):
    """Gauss-Newton projection onto the constraint manifold.

    Minimum-norm Newton corrections over the equality rows plus any violated
    inequalities; steps are clipped into the bounds.  Keeps the objective to
    first order since the correction is orthogonal to the constraint null
    space.  Returns the corrected point.
    """
    z = zs.copy()
    best = None
    for _ in range(max_steps):
        f, ceq, cin = sp.eval(z)
        viol = sp.violation_unscaled(ceq, cin)
        if best is None or viol < best[0]:
            best = (viol, z.copy())
        if viol <= 0.25 * feas_tol:
            break
        _, Jeq, Jin = sp.jac(z)
        rows = []
        res = []
        if sp.n_eq:
            rows.append(Jeq)
            res.append(ceq)
        bad = cin < 0.0
        if np.any(bad):
            rows.append(Jin[bad])
            res.append(cin[bad])
        if not rows:
            break
        A = np.vstack(rows)
        r = np.concatenate(res)
        step, *_ = np.linalg.lstsq(A, -r, rcond=None)
        if not np.all(np.isfinite(step)):
            break
        z = np.clip(z + step, sp.lb, sp.ub)
    f, ceq, cin = sp.eval(z)
    viol = sp.violation_unscaled(ceq, cin)
    if best is not None and best[0] < viol:
        viol, z = best
    return z


def _solve_auglag(p: NLPProblem, opt: SolverOptions) -> SolveReport:
    """LANCELOT-style augmented Lagrangian with L-BFGS-B subproblems.

    Multipliers are updated only when the subproblem ends inside the current
    feasibility gate eta; otherwise the penalty grows.  Both the gate and the
    inner gradient tolerance omega follow the classic 1/rho schedules.
    A Gauss-Newton feasibility restoration closes the final gap from the
    loose AL feasibility to the reported tolerance.
    """
    t0 = time.perf_counter()
    sp = _ScaledProblem(p, opt)
    zs = sp.x0.copy()
    y_eq = np.zeros(sp.n_eq)
    y_in = np.zeros(sp.n_in)
    rho = opt.rho0
    omega = 1.0 / rho
    eta = 1.0 / rho ** 0.1

    def al_value_grad(zv, ye, yi, rh):
        f, ceq, cin = sp.eval(zv)
        gf, Jeq, Jin = sp.jac(zv)
        val = f
        grad = gf
        if sp.n_eq:
            val += float(-ye @ ceq + 0.5 * rh * (ceq @ ceq))
            grad = grad + Jeq.T @ (rh * ceq - ye)
        if sp.n_in:
            act = np.maximum(0.0, yi - rh * cin)
            val += float(np.sum(act * act - yi * yi) / (2.0 * rh))
            grad = grad - Jin.T @ act
        return val, grad, f, ceq, cin

    def scaled_violation(ceq, cin):
        v = 0.0
        if sp.n_eq:
            v = max(v, float(np.max(np.abs(ceq))))
        if sp.n_in:
            v = max(v, float(np.max(np.maximum(0.0, -cin))))
        return v

    total_iters = 0
    bumps = 0
    best_v = np.inf
    status = ""
    message = ""
    f_last, ceq_last, cin_last = sp.eval(zs)
    stationarity = np.nan

    for outer in range(opt.max_outer):
        if total_iters >= opt.max_iterations:
            break
        fun = lambda zv: al_value_grad(zv, y_eq, y_in, rho)[:2]
        res = minimize(
            fun, zs, method="L-BFGS-B", jac=True,
            bounds=list(zip(sp.lb, sp.ub)),
            options={
                "maxiter": max(5, min(opt.inner_maxiter, opt.max_iterations - total_iters)),
                "gtol": max(omega, 1e-10), "ftol": 1e-16, "maxcor": 30,
            },
        )
        zs = np.clip(res.x, sp.lb, sp.ub)
        total_iters += int(res.nit)
        _, grad, f_last, ceq_last, cin_last = al_value_grad(zs, y_eq, y_in, rho)
        v_s = scaled_violation(ceq_last, cin_last)
        v_u = sp.violation_unscaled(ceq_last, cin_last)
        pg = np.clip(zs - grad, sp.lb, sp.ub) - zs
        stationarity = float(np.max(np.abs(pg))) if len(pg) else 0.0
        if opt.verbose:
            print(f"[auglag] outer={outer} rho={rho:.1e} viol_s={v_s:.3e} "
                  f"viol_u={v_u:.3e} pg={stationarity:.3e} f={f_last:.6g} nit={res.nit}")

        if v_u <= opt.feasibility_tol and stationarity <= opt.optimality_tol:
            status = "Optimal"
            break

        if stationarity <= opt.optimality_tol and v_s <= 1e-3:
            # the subproblem is solved and we are near the manifold: project
            zs = _restore_feasibility(sp, zs, opt.feasibility_tol)
            _, grad, f_last, ceq_last, cin_last = al_value_grad(zs, y_eq, y_in, rho)
            v_u = sp.violation_unscaled(ceq_last, cin_last)
            pg = np.clip(zs - grad, sp.lb, sp.ub) - zs
            stationarity = float(np.max(np.abs(pg))) if len(pg) else 0.0
            if v_u <= opt.feasibility_tol and stationarity <= opt.optimality_tol:
                status = "Optimal"
                break
            v_s = scaled_violation(ceq_last, cin_last)

        if v_s <= eta or v_u <= opt.feasibility_tol:
            # accept: first-order multiplier update, tighten tolerances
            y_eq = np.clip(y_eq - rho * ceq_last, -opt.multiplier_max, opt.multiplier_max)
            y_in = np.clip(np.maximum(0.0, y_in - rho * cin_last), 0.0, opt.multiplier_max)
            omega = max(omega / rho, 1e-12)
            eta = max(eta / rho ** 0.9, min(opt.feasibility_tol * 1e-2, 1e-8))
            bumps = 0
        else:
            rho = min(rho * opt.rho_growth, opt.rho_max)
            omega = 1.0 / rho
            eta = 1.0 / rho ** 0.1
            if v_s > opt.stall_factor * best_v:
                bumps += 1
            else:
                bumps = 0
            if bumps >= opt.stall_outer and v_u > 100.0 * opt.feasibility_tol:
                status = "Infeasible"
                message = f"violation stalled at {v_u:.2e}"
                break
            if rho >= opt.rho_max and v_u > opt.feasibility_tol:
                status = "Infeasible"
                message = f"penalty exhausted at violation {v_u:.2e}"
                break
        best_v = min(best_v, v_s)

    v_final = sp.violation_unscaled(ceq_last, cin_last)
    if not status and v_final > opt.feasibility_tol and \
            scaled_violation(ceq_last, cin_last) <= 1e-3:
        zs = _restore_feasibility(sp, zs, opt.feasibility_tol)
        f_last, ceq_last, cin_last = sp.eval(zs)
        v_final = sp.violation_unscaled(ceq_last, cin_last)
    if not status:
        status = "Feasible" if v_final <= opt.feasibility_tol else "IterationLimit"
    return SolveReport(
        status=status, z=sp.unscale(zs), objective=f_last,
        max_violation=v_final, iterations=total_iters,
        wall_time=time.perf_counter() - t0, stationarity=stationarity, message=message,
    )


def _solve_slsqp(p: NLPProblem, opt: SolverOptions) -> SolveReport:
    t0 = time.perf_counter()
    sp = _ScaledProblem(p, opt)

    cache = {}

    def get(zv):
        key = zv.tobytes()
        if key not in cache:
            cache.clear()
            f, ceq, cin = sp.eval(zv)
            cache[key] = (f, ceq, cin, None)
        return cache[key]

    def get_jac(zv):
        key = zv.tobytes()
        f, ceq, cin, J = get(zv)
        if J is None:
            J = sp.jac(zv)
            cache[key] = (f, ceq, cin, J)
        return J

    cons = []
    if sp.n_eq:
        cons.append({"type": "eq", "fun": lambda zv: get(zv)[1],
                     "jac": lambda zv: get_jac(zv)[1]})
    if sp.n_in:
        cons.append({"type": "ineq", "fun": lambda zv: get(zv)[2],
                     "jac": lambda zv: get_jac(zv)[2]})
    try:
        res = minimize(
            lambda zv: get(zv)[0], sp.x0, method="SLSQP",
            jac=lambda zv: get_jac(zv)[0],
            bounds=list(zip(sp.lb, sp.ub)), constraints=cons,
            options={"maxiter": min(opt.max_iterations, 500), "ftol": 1e-10},
        )
    except NumericalFailure:
        return SolveReport("NumericalFailure", p.x0, np.nan, np.inf, 0,
                           time.perf_counter() - t0, message="NaN/Inf during SLSQP")
    zs = np.clip(res.x, sp.lb, sp.ub)
    f, ceq, cin = sp.eval(zs)
    v = sp.violation_unscaled(ceq, cin)
    if opt.feasibility_tol < v and np.max(np.abs(ceq), initial=0.0) <= 1e-3 \
            and np.max(np.maximum(0.0, -cin), initial=0.0) <= 1e-3:
        zs = _restore_feasibility(sp, zs, opt.feasibility_tol)
        f, ceq, cin = sp.eval(zs)
        v = sp.violation_unscaled(ceq, cin)
    if v <= opt.feasibility_tol:
        status = "Optimal" if res.success else "Feasible"
    else:
        status = "Infeasible" if res.status in (4, 8) or res.success else "IterationLimit"
    return SolveReport(status, sp.unscale(zs), f, v, int(res.nit),
                       time.perf_counter() - t0, message=str(res.message))


def solve(problem: NLPProblem, options: SolverOptions | None = None) -> SolveReport:
    """Deterministic solve; see SolverOptions for tolerances and caps."""
    opt = options or SolverOptions()
    try:
        if opt.engine == "auglag":
            return _solve_auglag(problem, opt)
        if opt.engine == "slsqp":
            return _solve_slsqp(problem, opt)
        raise ValueError(f"unknown engine {opt.engine!r}")
    except NumericalFailure as exc:
        return SolveReport("NumericalFailure", problem.x0, np.nan, np.inf, 0, 0.0,
                           message=str(exc))
