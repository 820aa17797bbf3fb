import numpy as np
import pytest

from fallplan.model import ContactPoint, Environment, Link, PlanarRobotModel


@pytest.fixture(scope="session")
def pendulum():
    """Heavy base disc pinned by a two-point limb, one swinging rod."""
    links = [
        Link("disc", mass=5.0, inertia=0.05, length=0.2, com=(0.0, 0.0)),
        Link("rod", mass=0.8, inertia=0.006, length=1.0, com=(0.5, 0.0),
             parent=0, attach=(0.0, 0.0), mount=-np.pi / 2),
    ]
    cps = [
        ContactPoint("pin_a", 0, (0.1, 0.0), "PIN"),
        ContactPoint("pin_b", 0, (-0.1, 0.0), "PIN"),
    ]
    return PlanarRobotModel(
        links, cps, limbs=("PIN",),
        joint_limits=[(-3.0, 3.0)],
        velocity_limits=[12.0],
        torque_limits=[40.0],
        base_position_bounds=((-2.0, 2.0), (-1.0, 2.0), (-1.5, 1.5)),
        base_velocity_bounds=(6.0, 6.0, 10.0),
        force_bound=500.0,
        name="pendulum",
    )


@pytest.fixture(scope="session")
def tumbler():
    """Free-floating two-link chain; no contact points, used for pure dynamics tests."""
    links = [
        Link("core", mass=2.0, inertia=0.02, length=0.3, com=(0.05, 0.02)),
        Link("arm1", mass=1.1, inertia=0.015, length=0.5, com=(0.22, 0.0),
             parent=0, attach=(0.15, 0.05), mount=0.3),
        Link("arm2", mass=0.7, inertia=0.008, length=0.4, com=(0.18, -0.01),
             parent=1, attach=(0.5, 0.0), mount=-0.2),
    ]
    cps = [ContactPoint("tip", 2, (0.4, 0.0), "TIP")]
    return PlanarRobotModel(links, cps, limbs=("TIP",), name="tumbler")


@pytest.fixture(scope="session")
def branched():
    """Base with two children and a grandchild: exercises non-chain topology."""
    links = [
        Link("trunk", mass=3.0, inertia=0.04, length=0.4, com=(0.1, 0.0)),
        Link("left", mass=1.0, inertia=0.01, length=0.35, com=(0.15, 0.0),
             parent=0, attach=(0.0, 0.0), mount=np.pi),
        Link("right", mass=1.0, inertia=0.01, length=0.35, com=(0.15, 0.0),
             parent=0, attach=(0.4, 0.0), mount=0.5),
        Link("right_tip", mass=0.5, inertia=0.004, length=0.25, com=(0.1, 0.0),
             parent=2, attach=(0.35, 0.0), mount=-0.3),
    ]
    cps = [
        ContactPoint("lp", 1, (0.35, 0.0), "L"),
        ContactPoint("rp", 3, (0.25, 0.0), "R"),
    ]
    return PlanarRobotModel(links, cps, limbs=("L", "R"),
                            base_position_bounds=((-10.0, 10.0), (-1.0, 5.0), (-6.3, 6.3)),
                            name="branched")


@pytest.fixture(scope="session")
def flat_env():
    return Environment([((-50.0, 0.0), (50.0, 0.0))], mu=0.35)


@pytest.fixture(scope="session")
def wall_env():
    # ground plus a vertical wall at x = 1 whose free side faces -x
    return Environment([((-50.0, 0.0), (1.0, 0.0)), ((1.0, 0.0), (1.0, 3.0))], mu=0.35)


def random_state(model, rng, scale=1.0):
    q = np.zeros(model.n)
    q[0] = rng.uniform(-1, 1)
    q[1] = rng.uniform(0.3, 1.5)
    q[2] = rng.uniform(-np.pi, np.pi)
    q[3:] = rng.uniform(-1.5, 1.5, model.nj)
    qd = rng.uniform(-scale, scale, model.n)
    return q, qd
