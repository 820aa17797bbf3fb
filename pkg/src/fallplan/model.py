"""Planar articulated rigid-body model and environment geometry.

Conventions, used everywhere: world +x right, +z up, gravity 9.81 m/s^2 along
-z; all angles absolute, CCW from +x.  The configuration vector is
``q = [base_x, base_z, base_pitch, joint_0 .. joint_{nj-1}]``; the base body's
frame angle is ``base_pitch`` directly and joint j drives link j+1 with
``angle(child) = angle(parent) + mount + q[3+j]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import EnvArrays, ModelArrays, kernels


@dataclass(frozen=True)
class Link:
    """One rigid body; link 0 is the floating base (parent/attach/mount unused)."""

    name: str
    mass: float
    inertia: float
    length: float
    com: tuple[float, float]
    parent: int = -1
    attach: tuple[float, float] = (0.0, 0.0)
    mount: float = 0.0


@dataclass(frozen=True)
class ContactPoint:
    name: str
    link: int
    offset: tuple[float, float]
    limb: str


@dataclass(frozen=True)
class RobotState:
    """Generalized configuration and velocity pair."""

    q: np.ndarray
    qd: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "q", np.asarray(self.q, dtype=float).copy())
        object.__setattr__(self, "qd", np.asarray(self.qd, dtype=float).copy())
        if self.q.shape != self.qd.shape or self.q.ndim != 1:
            raise ValueError("q and qd must be 1-D vectors of equal length")
        if not (np.isfinite(self.q).all() and np.isfinite(self.qd).all()):
            raise ValueError("state entries must be finite")

    @property
    def n(self) -> int:
        return len(self.q)


class Environment:
    """Oriented line segments; free space lies on the CCW-left of a->b."""

    def __init__(self, segments: Sequence[tuple[tuple[float, float], tuple[float, float]]], mu: float):
        self.segments = [((float(a[0]), float(a[1])), (float(b[0]), float(b[1]))) for a, b in segments]
        self.mu = float(mu)
        self.arrays = EnvArrays([s[0] for s in self.segments], [s[1] for s in self.segments], self.mu)

    def to_dict(self) -> dict:
        return {"segments": [{"a": list(a), "b": list(b)} for a, b in self.segments], "mu": self.mu}

    @classmethod
    def from_dict(cls, d: dict) -> "Environment":
        return cls([(tuple(s["a"]), tuple(s["b"])) for s in d["segments"]], d["mu"])


class PlanarRobotModel:
    """Immutable planar robot; all operations are pure functions of (q, qd)."""

    def __init__(
        self,
        links: Sequence[Link],
        contact_points: Sequence[ContactPoint],
        limbs: Sequence[str],
        internal_points: Sequence[tuple[str, int, tuple[float, float]]] = (),
        joint_limits=None,
        velocity_limits=None,
        torque_limits=None,
        base_position_bounds=((-10.0, 10.0), (0.0, 5.0), (-2 * np.pi, 2 * np.pi)),
        base_velocity_bounds=(8.0, 8.0, 12.0),
        force_bound: float = 2200.0,
        gravity: float = 9.81,
        name: str = "robot",
    ):
        self.links = tuple(links)
        self.contact_points = tuple(contact_points)
        self.limbs = tuple(limbs)
        self.internal_points = tuple(internal_points)
        self.name = name

        nb = len(self.links)
        self.nj = nb - 1
        self.n = 3 + self.nj
        self.m = self.nj
        self.npts = len(self.contact_points)
        self.nint = len(self.internal_points)
        self.l = 2 * self.npts

        limb_set = set(self.limbs)
        for cp in self.contact_points:
            if cp.limb not in limb_set:
                raise ValueError(f"contact point {cp.name} names unknown limb {cp.limb}")
        self.limb_points = {
            limb: tuple(i for i, cp in enumerate(self.contact_points) if cp.limb == limb)
            for limb in self.limbs
        }
        for limb, pts in self.limb_points.items():
            if not pts:
                raise ValueError(f"limb {limb} has no contact points")

        jl = np.asarray(joint_limits if joint_limits is not None else [(-np.pi, np.pi)] * self.nj,
                        float).reshape(self.nj, 2)
        vl = np.asarray(velocity_limits if velocity_limits is not None else [10.0] * self.nj,
                        float).reshape(self.nj)
        tl = np.asarray(torque_limits if torque_limits is not None else [100.0] * self.nj,
                        float).reshape(self.nj)
        if jl.shape != (self.nj, 2) or vl.shape != (self.nj,) or tl.shape != (self.nj,):
            raise ValueError("joint/velocity/torque limit shapes do not match joint count")
        self.joint_limits = jl
        self.velocity_limits = vl
        self.torque_limits = tl

        bp = np.asarray(base_position_bounds, float)
        bv = np.asarray(base_velocity_bounds, float)
        self.q_min = np.concatenate([bp[:, 0], jl[:, 0]])
        self.q_max = np.concatenate([bp[:, 1], jl[:, 1]])
        self.qd_max = np.concatenate([bv, vl])
        self.u_max = tl
        self.force_bound = float(force_bound)
        self.gravity = float(gravity)

        self.arrays = ModelArrays(
            parent=[lk.parent for lk in self.links],
            joint_of_body=[-1] + list(range(self.nj)),
            mount=[lk.mount for lk in self.links],
            attach=[lk.attach for lk in self.links],
            mass=[lk.mass for lk in self.links],
            inertia=[lk.inertia for lk in self.links],
            com=[lk.com for lk in self.links],
            length=[lk.length for lk in self.links],
            act_joint=list(range(3, self.n)),
            cp_body=[cp.link for cp in self.contact_points],
            cp_off=[cp.offset for cp in self.contact_points],
            cp_limb=[self.limbs.index(cp.limb) for cp in self.contact_points],
            ip_body=[p[1] for p in self.internal_points],
            ip_off=[p[2] for p in self.internal_points] if self.internal_points else np.zeros((0, 2)),
            gravity=gravity,
        )
        self._axis_env = EnvArrays([[-1e9, 0.0]], [[1e9, 0.0]], 1.0)  # world-axis frames

    # -- dynamics terms -------------------------------------------------

    def mass_matrix(self, q: np.ndarray) -> np.ndarray:
        return kernels.mass_matrix(self.arrays, np.asarray(q, float))

    def bias_terms(self, q: np.ndarray, qd: np.ndarray):
        return kernels.bias_terms(self.arrays, np.asarray(q, float), np.asarray(qd, float))

    def kinetic_energy(self, state: RobotState) -> float:
        return kernels.kinetic_energy(self.arrays, state.q, state.qd)

    def contact_jacobian(self, q: np.ndarray, env: Environment | None = None) -> np.ndarray:
        """Rows (tangential, normal) per contact point.

        With no environment the frame is the world axes (tangent +x, normal
        +z); otherwise each point uses its governing segment's frame.
        """
        ea = env.arrays if env is not None else self._axis_env
        return kernels.contact_jacobian(self.arrays, ea, np.asarray(q, float))

    def accel(self, env: Environment, q, qd, u, lam) -> np.ndarray:
        return kernels.accel(self.arrays, env.arrays, np.asarray(q, float),
                             np.asarray(qd, float), np.asarray(u, float), np.asarray(lam, float))

    # -- geometry --------------------------------------------------------

    def contact_positions(self, q: np.ndarray) -> np.ndarray:
        return kernels.points_world(self.arrays, np.asarray(q, float),
                                    self.arrays.cp_body, self.arrays.cp_off)

    def internal_positions(self, q: np.ndarray) -> np.ndarray:
        return kernels.points_world(self.arrays, np.asarray(q, float),
                                    self.arrays.ip_body, self.arrays.ip_off)

    def signed_distances(self, env: Environment, q: np.ndarray) -> np.ndarray:
        d, _, _, _ = kernels.signed_distances(env.arrays, self.contact_positions(q))
        return d

    def clearance_distances(self, env: Environment, q: np.ndarray) -> np.ndarray:
        if not self.internal_points:
            return np.zeros(0)
        d, _, _, _ = kernels.signed_distances(env.arrays, self.internal_positions(q))
        return d

    def link_frames(self, q: np.ndarray):
        return kernels.fk(self.arrays, np.asarray(q, float))

    def total_mass(self) -> float:
        return float(sum(lk.mass for lk in self.links))

    # -- serialization ---------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "gravity": self.gravity,
            "links": [
                {
                    "name": lk.name, "mass": lk.mass, "inertia": lk.inertia,
                    "length": lk.length, "com": list(lk.com), "parent": lk.parent,
                    "attach": list(lk.attach), "mount": lk.mount,
                }
                for lk in self.links
            ],
            "limbs": list(self.limbs),
            "contact_points": [
                {"name": cp.name, "link": cp.link, "offset": list(cp.offset), "limb": cp.limb}
                for cp in self.contact_points
            ],
            "internal_points": [
                {"name": p[0], "link": p[1], "offset": list(p[2])} for p in self.internal_points
            ],
            "joint_limits": self.joint_limits.tolist(),
            "velocity_limits": self.velocity_limits.tolist(),
            "torque_limits": self.torque_limits.tolist(),
            "base_position_bounds": [[self.q_min[i], self.q_max[i]] for i in range(3)],
            "base_velocity_bounds": self.qd_max[:3].tolist(),
            "force_bound": self.force_bound,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PlanarRobotModel":
        links = [
            Link(lk["name"], lk["mass"], lk["inertia"], lk["length"], tuple(lk["com"]),
                 lk["parent"], tuple(lk["attach"]), lk["mount"])
            for lk in d["links"]
        ]
        cps = [ContactPoint(cp["name"], cp["link"], tuple(cp["offset"]), cp["limb"])
               for cp in d["contact_points"]]
        ips = [(p["name"], p["link"], tuple(p["offset"])) for p in d.get("internal_points", [])]
        bp = d.get("base_position_bounds", [[-10, 10], [0, 5], [-2 * np.pi, 2 * np.pi]])
        return cls(
            links, cps, d["limbs"], ips,
            joint_limits=d.get("joint_limits"),
            velocity_limits=d.get("velocity_limits"),
            torque_limits=d.get("torque_limits"),
            base_position_bounds=[tuple(b) for b in bp],
            base_velocity_bounds=tuple(d.get("base_velocity_bounds", (8.0, 8.0, 12.0))),
            force_bound=d.get("force_bound", 2200.0),
            gravity=d.get("gravity", 9.81),
            name=d.get("name", "robot"),
        )
