"""Pure-Python and compiled kernels must agree to near machine precision."""

import numpy as np
import pytest

from fallplan.core import _ref, kernels
from fallplan.contact import ContactMode
from fallplan.model import RobotState
from fallplan.transcription import TranscribedNLP, TransitionSpec

from .conftest import random_state
from .test_transcription import make_spec, settle_pose

pytestmark = pytest.mark.skipif(
    kernels.BACKEND == "python", reason="compiled backend not built")


def test_backend_is_compiled_by_default():
    assert kernels.BACKEND == "cython"


@pytest.mark.parametrize("fixture", ["pendulum", "tumbler", "branched"])
def test_dynamics_terms_agree(fixture, request, flat_env):
    model = request.getfixturevalue(fixture)
    md = model.arrays
    rng = np.random.default_rng(0)
    for _ in range(100):
        q, qd = random_state(model, rng, scale=2.0)
        assert np.allclose(kernels.fk(md, q)[0], _ref.fk(md, q)[0], atol=1e-14)
        assert np.allclose(kernels.mass_matrix(md, q), _ref.mass_matrix(md, q),
                           rtol=1e-13, atol=1e-13)
        C1, G1 = kernels.bias_terms(md, q, qd)
        C2, G2 = _ref.bias_terms(md, q, qd)
        assert np.allclose(C1, C2, rtol=1e-12, atol=1e-12)
        assert np.allclose(G1, G2, rtol=1e-12, atol=1e-12)
        assert kernels.kinetic_energy(md, q, qd) == pytest.approx(
            _ref.kinetic_energy(md, q, qd), rel=1e-13)


@pytest.mark.parametrize("fixture", ["pendulum", "branched"])
def test_geometry_agrees(fixture, request, wall_env):
    model = request.getfixturevalue(fixture)
    md = model.arrays
    ea = wall_env.arrays
    rng = np.random.default_rng(1)
    for _ in range(100):
        q, _ = random_state(model, rng)
        p1 = kernels.points_world(md, q, md.cp_body, md.cp_off)
        p2 = _ref.points_world(md, q, md.cp_body, md.cp_off)
        assert np.allclose(p1, p2, atol=1e-14)
        d1 = kernels.signed_distances(ea, p1)
        d2 = _ref.signed_distances(ea, p2)
        assert np.allclose(d1[0], d2[0], atol=1e-13)
        assert np.array_equal(d1[3], d2[3])
        assert np.allclose(kernels.contact_jacobian(md, ea, q),
                           _ref.contact_jacobian(md, ea, q), atol=1e-12)


def test_accel_agrees(branched, flat_env):
    md = branched.arrays
    ea = flat_env.arrays
    rng = np.random.default_rng(2)
    for _ in range(100):
        q, qd = random_state(branched, rng, scale=2.0)
        u = rng.normal(size=branched.m)
        lam = rng.normal(size=branched.l)
        a1 = kernels.accel(md, ea, q, qd, u, lam)
        a2 = _ref.accel(md, ea, q, qd, u, lam)
        assert np.allclose(a1, a2, rtol=1e-10, atol=1e-10)


@pytest.mark.parametrize("kind,active,change", [
    ("self_motion", [True, True], None),
    ("add_contact", [True, False], (1, True)),
    ("remove_contact", [True, True], (0, False)),
])
def test_eval_all_agrees(branched, flat_env, kind, active, change):
    spec = make_spec(branched, flat_env, kind=kind, active=active, goal_change=change)
    t = TranscribedNLP(branched, flat_env, spec, nd=5)
    rng = np.random.default_rng(3)
    for _ in range(20):
        z = np.where(t.ub > t.lb,
                     rng.uniform(np.clip(t.lb, -3, 3), np.clip(t.ub, -3, 3)),
                     t.lb)
        z[0] = rng.uniform(0.05, 0.4)
        f1, e1, i1 = kernels.eval_all(branched.arrays, flat_env.arrays, t.recipe, z)
        f2, e2, i2 = _ref.eval_all(branched.arrays, flat_env.arrays, t.recipe, z)
        assert f1 == pytest.approx(f2, rel=1e-12, abs=1e-14)
        assert np.allclose(e1, e2, rtol=1e-9, atol=1e-10)
        assert np.allclose(i1, i2, rtol=1e-12, atol=1e-12)
