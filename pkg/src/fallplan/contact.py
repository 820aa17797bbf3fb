"""Contact modes, limb-level adjacency, and the inelastic impact map."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .model import Environment, PlanarRobotModel


class SingularImpact(Exception):
    """Active-contact Jacobian is rank deficient; the impact system is degenerate."""


@dataclass(frozen=True)
class ContactMode:
    """Boolean activity vector over limbs, in the model's limb order."""

    active: tuple[bool, ...]

    def __post_init__(self):
        object.__setattr__(self, "active", tuple(bool(a) for a in self.active))

    @classmethod
    def from_limbs(cls, model: PlanarRobotModel, limbs) -> "ContactMode":
        names = set(limbs)
        unknown = names - set(model.limbs)
        if unknown:
            raise ValueError(f"unknown limbs: {sorted(unknown)}")
        return cls(tuple(name in names for name in model.limbs))

    def count(self) -> int:
        return sum(self.active)

    def limb_names(self, model: PlanarRobotModel) -> tuple[str, ...]:
        return tuple(name for name, a in zip(model.limbs, self.active) if a)

    def label(self, model: PlanarRobotModel) -> str:
        """Limb-name string used in all outputs, '-' for the free mode."""
        names = self.limb_names(model)
        return "/".join(names) if names else "-"

    def active_points(self, model: PlanarRobotModel) -> np.ndarray:
        """Indices of constrained contact points, ascending."""
        pts = []
        for limb, a in zip(model.limbs, self.active):
            if a:
                pts.extend(model.limb_points[limb])
        return np.array(sorted(pts), dtype=np.int32)

    def inactive_points(self, model: PlanarRobotModel) -> np.ndarray:
        act = set(int(p) for p in self.active_points(model))
        return np.array([p for p in range(model.npts) if p not in act], dtype=np.int32)

    def with_limb(self, idx: int, value: bool) -> "ContactMode":
        a = list(self.active)
        a[idx] = value
        return ContactMode(tuple(a))


def adjacent_modes(mode: ContactMode) -> list[ContactMode]:
    """All modes differing in exactly one limb, ascending limb index."""
    return [mode.with_limb(i, not mode.active[i]) for i in range(len(mode.active))]


def active_jacobian(model: PlanarRobotModel, q: np.ndarray, mode: ContactMode,
                    env: Environment | None = None) -> np.ndarray:
    """Row submatrix of the full contact Jacobian for the mode's points."""
    J = model.contact_jacobian(q, env)
    pts = mode.active_points(model)
    if len(pts) == 0:
        return np.zeros((0, model.n))
    rows = np.stack([J[2 * p + r] for p in pts for r in (0, 1)])
    return rows


@dataclass(frozen=True)
class ImpactResult:
    post_velocity: np.ndarray
    impulse: np.ndarray          # (tangential, normal) per active point, N s
    energy_before: float
    energy_after: float
    cone_consistent: bool        # impulse within the friction cone (reported, not enforced)


def impact_solve(D: np.ndarray, Jsig: np.ndarray, qd_minus: np.ndarray,
                 rank_tol: float = 1e-8):
    """Solve the inelastic impact block system for (qd_plus, impulse).

    [[D, -Jsig^T], [Jsig, 0]] [qd_plus; imp] = [D qd_minus; 0]

    Dependent constraint rows (e.g. toe and heel of a flat foot share their
    tangential direction) are reduced to an equivalent full-rank set via SVD;
    the post-impact velocity is unique either way and the returned impulse is
    the minimum-norm one.  SingularImpact signals a fully degenerate row set.
    """
    k = Jsig.shape[0]
    if k == 0:
        return qd_minus.copy(), np.zeros(0)
    U, sv, Vt = np.linalg.svd(Jsig, full_matrices=False)
    cut = rank_tol * max(1.0, sv[0] if len(sv) else 0.0)
    r = int(np.sum(sv > cut))
    if r == 0:
        raise SingularImpact(
            f"active contact Jacobian fully degenerate (sigma_max={sv[0]:.2e})")
    Jr = sv[:r, None] * Vt[:r]          # reduced rows, same nullspace
    n = D.shape[0]
    K = np.zeros((n + r, n + r))
    K[:n, :n] = D
    K[:n, n:] = -Jr.T
    K[n:, :n] = Jr
    rhs = np.zeros(n + r)
    rhs[:n] = D @ qd_minus
    sol = lu_solve(lu_factor(K), rhs)
    qd_plus = sol[:n]
    imp = U[:, :r] @ sol[n:]
    if np.max(np.abs(Jsig @ qd_plus)) > 1e-8 * max(1.0, float(np.max(np.abs(qd_minus)))):
        raise SingularImpact("impact system inconsistent after rank reduction")
    return qd_plus, imp


def impact_map(model: PlanarRobotModel, q: np.ndarray, qd_minus: np.ndarray,
               mode: ContactMode, env: Environment | None = None) -> ImpactResult:
    """Instantaneous inelastic velocity reset onto the mode's contact constraints."""
    q = np.asarray(q, float)
    qd_minus = np.asarray(qd_minus, float)
    D = model.mass_matrix(q)
    Jsig = active_jacobian(model, q, mode, env)
    qd_plus, imp = impact_solve(D, Jsig, qd_minus)
    e0 = 0.5 * float(qd_minus @ D @ qd_minus)
    e1 = 0.5 * float(qd_plus @ D @ qd_plus)
    mu = env.mu if env is not None else np.inf
    ok = True
    for i in range(len(imp) // 2):
        lt, ln = imp[2 * i], imp[2 * i + 1]
        if ln < -1e-9 or abs(lt) > mu * ln + 1e-9:
            ok = False
    return ImpactResult(qd_plus, imp, e0, e1, ok)
