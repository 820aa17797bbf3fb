import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fallplan.contact import (
    ContactMode,
    ImpactResult,
    SingularImpact,
    active_jacobian,
    adjacent_modes,
    impact_map,
    impact_solve,
)

from .conftest import random_state


def mode(*bits):
    return ContactMode(tuple(bool(b) for b in bits))


class TestAdjacentModes:
    def test_two_feet_example(self):
        got = adjacent_modes(mode(1, 1, 0, 0))
        want = [mode(0, 1, 0, 0), mode(1, 0, 0, 0), mode(1, 1, 1, 0), mode(1, 1, 0, 1)]
        assert got == want

    def test_all_inactive_adds_each(self):
        got = adjacent_modes(mode(0, 0, 0, 0))
        assert all(m.count() == 1 for m in got)
        assert len(got) == 4

    def test_all_active_removes_each(self):
        got = adjacent_modes(mode(1, 1, 1, 1))
        assert all(m.count() == 3 for m in got)
        assert len(got) == 4

    @given(st.lists(st.booleans(), min_size=1, max_size=6))
    def test_symmetric_relation(self, bits):
        a = ContactMode(tuple(bits))
        for b in adjacent_modes(a):
            assert a in adjacent_modes(b)

    @given(st.lists(st.booleans(), min_size=1, max_size=6))
    def test_exactly_one_change(self, bits):
        a = ContactMode(tuple(bits))
        ms = adjacent_modes(a)
        assert len(ms) == len(bits)
        for b in ms:
            assert sum(x != y for x, y in zip(a.active, b.active)) == 1


class TestActiveJacobian:
    def test_all_inactive_empty(self, branched):
        J = active_jacobian(branched, np.zeros(branched.n), mode(0, 0))
        assert J.shape == (0, branched.n)

    def test_all_active_equals_full(self, branched, flat_env):
        rng = np.random.default_rng(0)
        q, _ = random_state(branched, rng)
        J = active_jacobian(branched, q, mode(1, 1), flat_env)
        assert np.array_equal(J, branched.contact_jacobian(q, flat_env))

    def test_single_limb_rows(self, branched, flat_env):
        rng = np.random.default_rng(1)
        q, _ = random_state(branched, rng)
        full = branched.contact_jacobian(q, flat_env)
        J = active_jacobian(branched, q, mode(0, 1), flat_env)
        # limb "R" owns point 1 -> rows 2,3 of the full Jacobian
        assert np.array_equal(J, full[2:4])


class TestImpactSolve:
    def test_free_point_mass_normal_constraint(self):
        # 2-dof point mass, m = 2, falling; only the vertical velocity is constrained
        D = np.diag([2.0, 2.0])
        J = np.array([[0.0, 1.0]])
        qd_plus, imp = impact_solve(D, J, np.array([1.0, -3.0]))
        assert np.allclose(qd_plus, [1.0, 0.0])
        assert imp[0] == pytest.approx(6.0)

    def test_no_constraints_identity(self):
        D = np.diag([1.5, 2.5])
        qd = np.array([0.3, -0.7])
        qd_plus, imp = impact_solve(D, np.zeros((0, 2)), qd)
        assert np.array_equal(qd_plus, qd)
        assert imp.size == 0

    def test_fully_degenerate_jacobian_raises(self):
        D = np.eye(3)
        J = np.zeros((2, 3))
        with pytest.raises(SingularImpact):
            impact_solve(D, J, np.ones(3))

    def test_dependent_rows_reduced_min_norm(self):
        # duplicate rows: unique velocity, minimum-norm impulse split evenly
        D = np.diag([2.0, 2.0])
        J = np.array([[0.0, 1.0], [0.0, 1.0]])
        qd_plus, imp = impact_solve(D, J, np.array([1.0, -3.0]))
        assert np.allclose(qd_plus, [1.0, 0.0])
        assert np.allclose(imp, [3.0, 3.0])


class TestImpactMap:
    def test_inactive_mode_passthrough(self, tumbler):
        rng = np.random.default_rng(2)
        q, qd = random_state(tumbler, rng)
        res = impact_map(tumbler, q, qd, mode(0))
        assert np.array_equal(res.post_velocity, qd)
        assert res.impulse.size == 0

    def test_velocity_annihilated_and_dissipative(self, branched, flat_env):
        rng = np.random.default_rng(3)
        for _ in range(300):
            q, qd = random_state(branched, rng, scale=2.0)
            m = mode(*rng.integers(0, 2, 2))
            try:
                res = impact_map(branched, q, qd, m, flat_env)
            except SingularImpact:
                continue
            Js = active_jacobian(branched, q, m, flat_env)
            if len(Js):
                assert np.max(np.abs(Js @ res.post_velocity)) < 1e-9
            assert res.energy_after <= res.energy_before + 1e-9

    def test_idempotent(self, branched, flat_env):
        rng = np.random.default_rng(4)
        for _ in range(100):
            q, qd = random_state(branched, rng, scale=2.0)
            m = mode(1, 0)
            res = impact_map(branched, q, qd, m, flat_env)
            res2 = impact_map(branched, q, res.post_velocity, m, flat_env)
            assert np.max(np.abs(res2.impulse)) < 1e-9
            assert np.max(np.abs(res2.post_velocity - res.post_velocity)) < 1e-9

    def test_energy_equal_iff_already_consistent(self, branched, flat_env):
        rng = np.random.default_rng(5)
        q, qd = random_state(branched, rng)
        m = mode(1, 0)
        res = impact_map(branched, q, qd, m, flat_env)
        # velocities already satisfying the constraint are untouched
        res2 = impact_map(branched, q, res.post_velocity, m, flat_env)
        assert res2.energy_after == pytest.approx(res2.energy_before, abs=1e-12)

    def test_dense_solve_oracle(self, branched, flat_env):
        rng = np.random.default_rng(6)
        for _ in range(50):
            q, qd = random_state(branched, rng, scale=2.0)
            m = mode(1, 1)
            res = impact_map(branched, q, qd, m, flat_env)
            D = branched.mass_matrix(q)
            Js = active_jacobian(branched, q, m, flat_env)
            k = Js.shape[0]
            K = np.block([[D, -Js.T], [Js, np.zeros((k, k))]])
            sol = np.linalg.solve(K, np.concatenate([D @ qd, np.zeros(k)]))
            assert np.allclose(res.post_velocity, sol[:branched.n], atol=1e-9)
            assert np.allclose(res.impulse, sol[branched.n:], atol=1e-9)

    def test_result_type(self, branched, flat_env):
        rng = np.random.default_rng(7)
        q, qd = random_state(branched, rng)
        res = impact_map(branched, q, qd, mode(1, 0), flat_env)
        assert isinstance(res, ImpactResult)
        assert isinstance(res.cone_consistent, bool)


class TestModeLabels:
    def test_label_uses_limb_names(self, branched):
        assert mode(1, 1).label(branched) == "L/R"
        assert mode(0, 1).label(branched) == "R"
        assert mode(0, 0).label(branched) == "-"

    def test_from_limbs_roundtrip(self, branched):
        m = ContactMode.from_limbs(branched, ["R"])
        assert m == mode(0, 1)
        with pytest.raises(ValueError):
            ContactMode.from_limbs(branched, ["XX"])
