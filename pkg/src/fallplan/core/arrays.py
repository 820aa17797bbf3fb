"""Flat array descriptions of robot, environment and transcription layout.

The kernel backends (`_ref`, `_fast`) operate on these containers only, so the
same numeric code path serves the pure-Python and compiled implementations.
All arrays are C-contiguous float64 / int32.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def _f8(a) -> np.ndarray:
    return np.ascontiguousarray(np.asarray(a, dtype=np.float64))


def _i4(a) -> np.ndarray:
    return np.ascontiguousarray(np.asarray(a, dtype=np.int32))


class ModelArrays:
    """Planar kinematic tree flattened for the kernels.

    Body 0 is the floating-base body; its frame pose is (q[0], q[1]) and
    absolute angle q[2].  Every other body i is driven by revolute joint
    joint_of_body[i] (q index 3 + joint), mounted on parent[i] at the local
    anchor attach[i], with a fixed mount angle added to the joint angle.
    Angles are absolute, measured CCW from the world +x axis.
    """

    def __init__(
        self,
        parent,
        joint_of_body,
        mount,
        attach,
        mass,
        inertia,
        com,
        length,
        act_joint,
        cp_body,
        cp_off,
        cp_limb,
        ip_body,
        ip_off,
        gravity: float = 9.81,
    ):
        self.parent = _i4(parent)
        self.joint_of_body = _i4(joint_of_body)
        self.mount = _f8(mount)
        self.attach = _f8(attach).reshape(-1, 2)
        self.mass = _f8(mass)
        self.inertia = _f8(inertia)
        self.com = _f8(com).reshape(-1, 2)
        self.length = _f8(length)
        self.act_joint = _i4(act_joint)
        self.cp_body = _i4(cp_body)
        self.cp_off = _f8(cp_off).reshape(-1, 2)
        self.cp_limb = _i4(cp_limb)
        self.ip_body = _i4(ip_body)
        self.ip_off = _f8(ip_off).reshape(-1, 2) if len(ip_body) else np.zeros((0, 2))
        self.gravity = float(gravity)

        self.nb = len(self.mass)
        self.nj = self.nb - 1
        self.n = 3 + self.nj
        self.m = len(self.act_joint)
        self.npts = len(self.cp_body)
        self.nint = len(self.ip_body)
        self.l = 2 * self.npts

        if not np.all(self.parent[1:] < np.arange(1, self.nb)):
            raise ValueError("bodies must be topologically ordered (parent index < body index)")
        if self.parent[0] != -1:
            raise ValueError("body 0 must be the floating base (parent -1)")
        if np.any(self.mass <= 0) or np.any(self.length[1:] <= 0):
            raise ValueError("masses and link lengths must be positive")

        # joint q-index chain per body, padded with -1
        self.dof_count = np.zeros(self.nb, dtype=np.int32)
        self.dof_list = -np.ones((self.nb, max(self.nj, 1)), dtype=np.int32)
        for i in range(1, self.nb):
            chain = list(self.dof_list[self.parent[i], : self.dof_count[self.parent[i]]])
            chain.append(3 + int(self.joint_of_body[i]))
            self.dof_count[i] = len(chain)
            self.dof_list[i, : len(chain)] = chain
        # body whose origin anchors joint j (the body the joint drives)
        self.joint_body = -np.ones(self.nj, dtype=np.int32)
        for i in range(1, self.nb):
            self.joint_body[self.joint_of_body[i]] = i
        if np.any(self.joint_body < 0):
            raise ValueError("every joint must drive exactly one body")


class EnvArrays:
    """Oriented environment segments; free space lies on the CCW-normal side."""

    def __init__(self, seg_a, seg_b, mu: float):
        self.a = _f8(seg_a).reshape(-1, 2)
        self.b = _f8(seg_b).reshape(-1, 2)
        d = self.b - self.a
        ln = np.hypot(d[:, 0], d[:, 1])
        if np.any(ln <= 0):
            raise ValueError("environment segments must have positive length")
        if mu <= 0:
            raise ValueError("friction coefficient must be positive")
        self.tang = d / ln[:, None]
        self.nrm = np.stack([-self.tang[:, 1], self.tang[:, 0]], axis=1)
        self.nseg = len(ln)
        self.mu = float(mu)


@dataclass
class Recipe:
    """Row layout of one transcribed trajectory optimization.

    Equality rows, in order:
      for k in 1..Nd-1:  phi(active pts) [ka],
                         point velocities (tangent, normal) of hol_pts [2 kh],
                         link angular velocities of hol_bodies [kw]
      for i in 0..Nd-2:  midpoint dynamics defect [n]
      terminal:          phi(term_pts) at knot Nd-1 [kt]
    Inequality rows, in order:
      for k in 0..Nd-1:  friction cone slack per active pt, minus the
                         skip-set at the last knot
      for k in 1..Nd-1:  phi(inactive pts) - eps [kb], phi(internal) - eps [ni]
    Decision vector: [h, then per knot (q, qd, u, lam)].

    The (hol_pts, hol_bodies) pair is the non-redundant equivalent of pinning
    every active point's velocity: one representative point per limb link plus
    that link's angular rate when it carries several points.
    """

    nd: int
    act: np.ndarray          # int32, active contact point indices
    inact: np.ndarray        # int32, inactive contact point indices
    eps_inact: np.ndarray    # float64 per inactive point
    eps_internal: np.ndarray  # float64 per internal point
    term_pts: np.ndarray     # int32, points pinned at the final knot
    hol_pts: np.ndarray      # int32, points whose velocity rows are emitted
    hol_bodies: np.ndarray   # int32, bodies whose angular rate is pinned
    cone_margin: float = 1e-4
    skip_cone_last: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int32))

    def __post_init__(self):
        self.act = _i4(self.act)
        self.inact = _i4(self.inact)
        self.eps_inact = _f8(self.eps_inact)
        self.eps_internal = _f8(self.eps_internal)
        self.term_pts = _i4(self.term_pts)
        self.hol_pts = _i4(self.hol_pts)
        self.hol_bodies = _i4(self.hol_bodies)
        self.skip_cone_last = _i4(self.skip_cone_last)

    @property
    def eq_knot_rows(self) -> int:
        return len(self.act) + 2 * len(self.hol_pts) + len(self.hol_bodies)

    def counts(self, md: ModelArrays) -> tuple[int, int]:
        ka, kb = len(self.act), len(self.inact)
        n_eq = (self.nd - 1) * self.eq_knot_rows + (self.nd - 1) * md.n + len(self.term_pts)
        n_ineq = self.nd * ka - len(self.skip_cone_last) + (self.nd - 1) * (kb + md.nint)
        return n_eq, n_ineq
