import numpy as np
import pytest

from fallplan.contact import ContactMode
from fallplan.model import ContactPoint, Link, PlanarRobotModel, RobotState
from fallplan.seeding import (
    NoSeedWorked,
    SeedSchedule,
    build_seed,
    clip_to_cone,
    least_squares_inputs,
    parabolic_seed,
    project_to_manifold,
    reference_goal,
    seed_sweep,
)
from fallplan.transcription import TranscribedNLP, TranscriptionOptions, TransitionSpec

from .conftest import random_state
from .test_transcription import make_spec


class TestSchedule:
    def test_uniform_inclusive_grid(self):
        s = SeedSchedule(0.25, 3.5, 40)
        d = s.durations()
        assert len(d) == 40
        assert d[0] == pytest.approx(0.25)
        assert d[-1] == pytest.approx(3.5)
        assert np.allclose(np.diff(d), (3.5 - 0.25) / 39)

    def test_validation(self):
        with pytest.raises(ValueError):
            SeedSchedule(1.0, 0.5, 10)
        with pytest.raises(ValueError):
            SeedSchedule(0.1, 1.0, 0)


class TestReferenceGoal:
    def test_scalar_formula(self):
        x0 = RobotState(np.zeros(1), np.array([2.0]))
        q_ref, qdd_ref = reference_goal(x0, 1.0)
        assert q_ref[0] == pytest.approx(1.0)
        assert qdd_ref[0] == pytest.approx(-2.0)

    def test_zero_velocity_keeps_pose(self):
        x0 = RobotState(np.array([0.3, -1.0]), np.zeros(2))
        q_ref, qdd_ref = reference_goal(x0, 2.0)
        assert np.allclose(q_ref, x0.q)
        assert np.allclose(qdd_ref, 0.0)

    def test_vector_matches_elementwise(self):
        rng = np.random.default_rng(0)
        q = rng.normal(size=6)
        qd = rng.normal(size=6)
        t = 1.7
        q_ref, qdd_ref = reference_goal(RobotState(q, qd), t)
        for i in range(6):
            assert q_ref[i] == pytest.approx(q[i] + 0.5 * qd[i] * t)
            assert qdd_ref[i] == pytest.approx(-qd[i] / t)


class TestProjection:
    def test_already_feasible_is_fixed_point(self, branched, flat_env):
        spec = make_spec(branched, flat_env)
        q_g = project_to_manifold(branched, flat_env, spec.start.q, spec.sigma_i)
        assert np.allclose(q_g, spec.start.q, atol=1e-9)

    def test_single_point_vertical_shift(self, flat_env):
        links = [Link("b", 1.0, 0.01, 0.1, (0.0, 0.0))]
        cps = [ContactPoint("p", 0, (0.0, 0.0), "P")]
        m = PlanarRobotModel(links, cps, limbs=("P",))
        q_ref = np.array([0.4, 0.1, 0.2])
        q_g = project_to_manifold(m, flat_env, q_ref, ContactMode((True,)))
        assert q_g[1] == pytest.approx(0.0, abs=1e-9)
        assert q_g[0] == pytest.approx(0.4, abs=1e-9)
        assert q_g[2] == pytest.approx(0.2, abs=1e-9)

    def test_contacts_closed_and_locally_nearest(self, branched, flat_env):
        rng = np.random.default_rng(1)
        mode = ContactMode((True, True))
        for _ in range(20):
            q_ref, _ = random_state(branched, rng)
            q_g = project_to_manifold(branched, flat_env, q_ref, mode)
            d = branched.signed_distances(flat_env, q_g)
            for p in mode.active_points(branched):
                assert abs(d[p]) < 1e-8
            base = np.linalg.norm(q_g - q_ref)
            # sampled local optimality: nearby feasible points are no closer
            for _ in range(100):
                guess = q_g + rng.normal(0.0, 0.02, branched.n)
                q_alt = project_to_manifold(branched, flat_env, guess, mode)
                assert base <= np.linalg.norm(q_alt - q_ref) + 1e-6


class TestParabolicSeed:
    def test_hand_algebra(self):
        x0 = RobotState(np.zeros(1), np.array([2.0]))
        qs, qds, qdds = parabolic_seed(x0, np.array([1.0]), 1.0, 5)
        ts = np.linspace(0, 1, 5)
        assert np.allclose(qs[:, 0], 2 * ts - ts ** 2)
        assert np.allclose(qds[:, 0], 2 - 2 * ts)
        assert np.allclose(qdds[:, 0], -2.0)
        assert qds[-1, 0] == pytest.approx(0.0)

    def test_stationary_goal(self):
        x0 = RobotState(np.array([0.7, 0.1]), np.zeros(2))
        qs, qds, _ = parabolic_seed(x0, x0.q, 2.0, 6)
        assert np.allclose(qs, np.repeat(x0.q[None, :], 6, 0))
        assert np.allclose(qds, 0.0)

    def test_endpoint_interpolation_exact(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            n = 4
            x0 = RobotState(rng.normal(size=n), rng.normal(size=n))
            q_g = rng.normal(size=n)
            t = rng.uniform(0.2, 3.0)
            qs, qds, _ = parabolic_seed(x0, q_g, t, 7)
            assert np.max(np.abs(qs[0] - x0.q)) < 1e-12
            assert np.max(np.abs(qds[0] - x0.qd)) < 1e-12
            assert np.max(np.abs(qs[-1] - q_g)) < 1e-12


class TestLeastSquaresInputs:
    def test_pinned_fully_supported_zero_residual(self, pendulum, flat_env):
        rng = np.random.default_rng(3)
        mode = ContactMode((True,))
        q = np.zeros(pendulum.n)
        q[3] = 0.4
        qd = rng.normal(size=pendulum.n) * 0.5
        qdd = rng.normal(size=pendulum.n)
        u, lam, r = least_squares_inputs(pendulum, flat_env, q, qd, qdd, mode)
        # [B, J^T] spans R^n for the pinned disc: exact fit
        assert np.max(np.abs(r)) < 1e-9

    def test_free_floating_residual_is_base_wrench(self, tumbler, flat_env):
        mode = ContactMode((False,))
        q, _ = random_state(tumbler, np.random.default_rng(4))
        qd = np.zeros(tumbler.n)
        qdd = np.zeros(tumbler.n)
        u, lam, r = least_squares_inputs(tumbler, flat_env, q, qd, qdd, mode)
        _, G = tumbler.bias_terms(q, qd)
        assert np.allclose(r[:3], G[:3], atol=1e-9)
        assert np.max(np.abs(r[3:])) < 1e-9
        assert np.max(np.abs(lam)) == 0.0

    def test_least_squares_optimality_sampling(self, branched, flat_env):
        rng = np.random.default_rng(5)
        mode = ContactMode((True, False))
        q, qd = random_state(branched, rng)
        qdd = rng.normal(size=branched.n)
        u, lam, r = least_squares_inputs(branched, flat_env, q, qd, qdd, mode)
        D = branched.mass_matrix(q)
        C, G = branched.bias_terms(q, qd)
        lhs = D @ qdd + C + G
        J = branched.contact_jacobian(q, flat_env)
        B = np.zeros((branched.n, branched.m))
        for j, col in enumerate(branched.arrays.act_joint):
            B[col, j] = 1.0
        base = np.linalg.norm(r)
        for _ in range(100):
            du = u + rng.normal(0, 1, branched.m)
            dl = lam.copy()
            dl[0:2] += rng.normal(0, 1, 2)
            alt = lhs - B @ du - J.T @ dl
            assert base <= np.linalg.norm(alt) + 1e-9


class TestConeClip:
    def test_clips_to_boundary(self):
        lam = np.array([5.0, 2.0, -9.0, 4.0, 1.0, -3.0])
        out = clip_to_cone(lam, mu=0.5)
        assert out[0] == pytest.approx(1.0)   # |lt| <= mu ln
        assert out[1] == pytest.approx(2.0)
        assert out[2] == pytest.approx(-2.0)
        assert out[3] == pytest.approx(4.0)
        assert out[4] == pytest.approx(0.0)   # negative normal zeroed
        assert out[5] == pytest.approx(0.0)


class TestSeedSweep:
    def test_success_at_specific_index(self):
        sched = SeedSchedule(0.25, 3.5, 40)
        calls = []

        class R:
            def __init__(self, ok):
                self.success = ok

        def solve_fn(t):
            calls.append(t)
            return R(len(calls) == 8)

        t, i, res = seed_sweep(sched, solve_fn)
        assert len(calls) == 8
        assert i == 7
        assert t == pytest.approx(0.25 + 7 * (3.5 - 0.25) / 39)

    def test_exhaustion_raises(self):
        sched = SeedSchedule(0.1, 1.0, 5)
        calls = []

        def solve_fn(t):
            calls.append(t)
            return None

        with pytest.raises(NoSeedWorked) as ei:
            seed_sweep(sched, solve_fn)
        assert len(calls) == 5
        assert ei.value.attempts == 5

    def test_deterministic_attempt_sequence(self):
        sched = SeedSchedule(0.2, 2.0, 7)
        seen1, seen2 = [], []
        try:
            seed_sweep(sched, lambda t: seen1.append(t))
        except NoSeedWorked:
            pass
        try:
            seed_sweep(sched, lambda t: seen2.append(t))
        except NoSeedWorked:
            pass
        assert seen1 == seen2


class TestBuildSeed:
    def test_knot_zero_matches_start_exactly(self, pendulum, flat_env):
        q0 = np.zeros(pendulum.n)
        q0[3] = 0.6
        qd0 = np.zeros(pendulum.n)
        qd0[3] = 1.2
        mode = ContactMode((True,))
        spec = TransitionSpec(RobotState(q0, qd0), mode, mode, "self_motion")
        tnlp = TranscribedNLP(pendulum, flat_env, spec, nd=6,
                              options=TranscriptionOptions(t_min=0.3, t_max=2.0))
        z = build_seed(tnlp, 0.9)
        lay = tnlp.layout
        assert np.array_equal(z[lay.q(0)], q0)
        assert np.array_equal(z[lay.qd(0)], qd0)
        assert np.all(z >= tnlp.lb) and np.all(z <= tnlp.ub)
        # seeded forces satisfy the cone after clipping
        mu = flat_env.mu
        for k in range(6):
            lam = z[lay.lam(k)]
            for p in range(pendulum.npts):
                assert lam[2 * p + 1] >= 0
                assert abs(lam[2 * p]) <= mu * lam[2 * p + 1] + 1e-12
