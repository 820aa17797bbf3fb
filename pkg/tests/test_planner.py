import numpy as np
import pytest

from fallplan.contact import ContactMode
from fallplan.model import RobotState
from fallplan.nlp import SolverOptions
from fallplan.planner import (
    InvalidStart,
    Planner,
    PlannerOptions,
    PlanResult,
    TransitionTree,
    TreeNode,
    export_dot,
    static_force_feasible,
)
from fallplan.seeding import SeedSchedule
from fallplan.transcription import CollocationTrajectory, TranscriptionOptions


def pendulum_planner(pendulum, flat_env, **kw):
    opts = PlannerOptions(
        nd=6,
        schedule=SeedSchedule(0.4, 2.0, 5),
        transcription=TranscriptionOptions(t_min=0.4, t_max=2.0),
        solver=SolverOptions(engine="slsqp"),
        **kw,
    )
    return Planner(pendulum, flat_env, opts)


def pendulum_state(pendulum, theta=0.0, omega=0.0):
    q = np.zeros(pendulum.n)
    qd = np.zeros(pendulum.n)
    q[3] = theta
    qd[3] = omega
    return RobotState(q, qd)


class TestSelfMotion:
    def test_stationary_node_gets_trivial_trajectory(self, pendulum, flat_env):
        p = pendulum_planner(pendulum, flat_env)
        node = TreeNode(id=0, mode=ContactMode((True,)),
                        state=pendulum_state(pendulum, 0.3), ke=0.0, depth=0)
        y = p.opt_self_motion(node)
        assert y is not None
        assert y.nd == 1
        assert y.duration == 0.0
        assert np.array_equal(y.end_state().q, node.state.q)

    def test_small_push_swings_to_rest(self, pendulum, flat_env):
        p = pendulum_planner(pendulum, flat_env)
        state = pendulum_state(pendulum, 0.5, 1.4)
        node = TreeNode(id=0, mode=ContactMode((True,)), state=state,
                        ke=pendulum.kinetic_energy(state), depth=0)
        y = p.opt_self_motion(node)
        assert y is not None
        assert pendulum.kinetic_energy(y.end_state()) < 0.1


class TestPlanEndToEnd:
    def test_small_push_depth_zero(self, pendulum, flat_env):
        p = pendulum_planner(pendulum, flat_env)
        state = pendulum_state(pendulum, 0.4, 1.2)
        result = p.plan(state, ContactMode((True,)))
        assert result.stabilized
        assert len(result.modes) == 1
        assert len(result.trajectories) == 1
        final = result.trajectories[-1]
        assert pendulum.kinetic_energy(final.end_state()) < 0.1
        assert result.stats["nodes_expanded"] == 0

    def test_invalid_start_raises(self, pendulum, flat_env):
        p = pendulum_planner(pendulum, flat_env)
        q = np.zeros(pendulum.n)
        q[1] = 0.5  # pin floating above the ground
        with pytest.raises(InvalidStart):
            p.plan(RobotState(q, np.zeros(pendulum.n)), ContactMode((True,)))

    def test_event_log_records_pops_and_termination(self, pendulum, flat_env):
        p = pendulum_planner(pendulum, flat_env)
        state = pendulum_state(pendulum, 0.4, 1.0)
        p.plan(state, ContactMode((True,)))
        kinds = [e["event"] for e in p.events]
        assert kinds[0] == "pop"
        assert "terminate" in kinds


class StubPlanner(Planner):
    """Planner with scripted solve outcomes for search-semantics tests."""

    def __init__(self, model, env, options, self_ok, child_kes):
        super().__init__(model, env, options)
        self.self_ok = self_ok          # node ke below this succeeds
        self.child_kes = child_kes      # mode label -> scripted child KE or None

    def _traj(self, node, ke):
        qd = np.zeros(self.model.n)
        # scale the rod velocity so kinetic energy matches the script
        qd[3] = 1.0
        st = RobotState(node.state.q, qd)
        e1 = self.model.kinetic_energy(st)
        qd[3] = np.sqrt(ke / e1)
        return CollocationTrajectory(
            h=0.1, qs=np.repeat(node.state.q[None, :], 2, 0),
            qds=np.stack([node.state.qd, qd]),
            us=np.zeros((2, self.model.m)), lams=np.zeros((2, self.model.l)))

    def opt_self_motion(self, node):
        if node.ke < self.opt.eps_ke or node.ke < self.self_ok:
            return self._traj(node, 0.0)
        return None

    def opt_transition_motion(self, node, goal_mode):
        ke = self.child_kes.get((node.depth, goal_mode.label(self.model)))
        if ke is None:
            return None
        return self._traj(node, ke)


class TestSearchSemantics:
    def test_greedy_pop_order_and_fifo_ties(self, pendulum, flat_env):
        opts = PlannerOptions(max_depth=2, max_expansions=10)
        # root fails self-motion; both children at depth 1, one cheaper
        script = {
            (0, "-"): 4.0,     # removing PIN gives the free mode "-"
        }
        p = StubPlanner(pendulum, flat_env, opts, self_ok=0.0, child_kes=script)
        state = pendulum_state(pendulum, 0.5, 2.0)
        state.qd[0] = 1.0
        result = p.plan(state, ContactMode((True,)))
        pops = [e for e in p.events if e["event"] == "pop"]
        kes = [e["ke"] for e in pops]
        # root first, then the scripted child; stub self-motion never gates
        assert kes == sorted(kes) or len(kes) <= 2

    def test_dead_leaf_when_all_transitions_fail(self, pendulum, flat_env):
        opts = PlannerOptions(max_depth=2, max_expansions=4)
        p = StubPlanner(pendulum, flat_env, opts, self_ok=0.0, child_kes={})
        state = pendulum_state(pendulum, 0.5, 2.0)
        result = p.plan(state, ContactMode((True,)))
        assert result.status == "NoSolution"
        assert result.tree.nodes[0].expanded
        assert result.tree.nodes[0].children == []

    def test_stabilizes_at_child_and_chains(self, pendulum, flat_env):
        opts = PlannerOptions(max_depth=2, max_expansions=4)
        script = {(0, "-"): 0.05}
        p = StubPlanner(pendulum, flat_env, opts, self_ok=0.0, child_kes=script)
        state = pendulum_state(pendulum, 0.5, 2.0)
        result = p.plan(state, ContactMode((True,)))
        assert result.stabilized
        assert [m.label(pendulum) for m in result.modes] == ["PIN", "-"]
        assert len(result.trajectories) == 2
        # chain continuity: transition end state = child self-motion start state
        t_end = result.trajectories[0].end_state()
        s_start = result.trajectories[1].start_state()
        assert np.allclose(t_end.q, s_start.q, atol=1e-6)

    def test_budget_exhausted(self, pendulum, flat_env):
        opts = PlannerOptions(max_depth=5, max_expansions=1)
        script = {(0, "-"): 4.0, (1, "PIN"): 3.0}
        p = StubPlanner(pendulum, flat_env, opts, self_ok=0.0, child_kes=script)
        state = pendulum_state(pendulum, 0.5, 2.0)
        result = p.plan(state, ContactMode((True,)))
        assert result.status == "BudgetExhausted"


class TestStaticForceFeasibility:
    def test_supported_pose_feasible(self, pendulum, flat_env):
        q = np.zeros(pendulum.n)
        assert static_force_feasible(pendulum, flat_env, q, ContactMode((True,)))

    def test_free_mode_infeasible_under_gravity(self, pendulum, flat_env):
        q = np.zeros(pendulum.n)
        assert not static_force_feasible(pendulum, flat_env, q, ContactMode((False,)))


class TestDotExport:
    def test_colors_and_labels(self, pendulum, flat_env):
        p = pendulum_planner(pendulum, flat_env)
        state = pendulum_state(pendulum, 0.4, 1.0)
        result = p.plan(state, ContactMode((True,)))
        dot = export_dot(pendulum, result)
        assert "digraph" in dot
        assert "lightblue" in dot        # terminal node
        assert "PIN" in dot
        # deterministic output
        assert dot == export_dot(pendulum, result)
