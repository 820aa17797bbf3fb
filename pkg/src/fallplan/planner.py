"""Contact-transition tree search with a minimum-kinetic-energy frontier.

Grows a tree rooted at the disturbed state: each popped node first attempts a
fixed-contact stabilization (inertial shaping); if the terminal energy gate
fails, the node expands to every adjacent contact mode through a transition
trajectory optimization, applying the inelastic impact map on contact
additions.  The frontier is keyed by node kinetic energy, FIFO on ties.
"""

from __future__ import annotations

import heapq
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .contact import ContactMode, SingularImpact, adjacent_modes, impact_map
from .model import Environment, PlanarRobotModel, RobotState
from .nlp import NLPProblem, SolverOptions, solve
from .seeding import NoSeedWorked, SeedSchedule, build_seed, seed_sweep
from .transcription import (
    CollocationTrajectory,
    InfeasibleSpec,
    TranscribedNLP,
    TranscriptionOptions,
    TransitionSpec,
)


class InvalidStart(Exception):
    """Initial state violates the initial contact mode."""


@dataclass
class PlannerOptions:
    eps_ke: float = 0.1                 # terminal kinetic energy gate, J
    nd: int = 8                         # knots per trajectory
    schedule: SeedSchedule = field(default_factory=lambda: SeedSchedule(0.25, 3.5, 40))
    transcription: TranscriptionOptions = field(default_factory=TranscriptionOptions)
    solver: SolverOptions = field(default_factory=SolverOptions)
    max_expansions: int = 64
    max_depth: int = 4
    wall_time: float = 1800.0
    threads: int = 1


@dataclass
class TreeNode:
    id: int
    mode: ContactMode
    state: RobotState
    ke: float
    depth: int
    parent: int | None = None
    incoming: CollocationTrajectory | None = None
    self_motion: CollocationTrajectory | None = None
    expanded: bool = False
    children: list[int] = field(default_factory=list)


@dataclass
class TransitionTree:
    nodes: list[TreeNode] = field(default_factory=list)

    def add(self, node: TreeNode) -> int:
        node.id = len(self.nodes)
        self.nodes.append(node)
        return node.id

    def path_to_root(self, node_id: int) -> list[int]:
        path = [node_id]
        while self.nodes[path[-1]].parent is not None:
            path.append(self.nodes[path[-1]].parent)
        return list(reversed(path))


@dataclass
class PlanResult:
    status: str                         # Stabilized | NoSolution | BudgetExhausted
    modes: list[ContactMode]
    trajectories: list[CollocationTrajectory]
    tree: TransitionTree
    terminal_node: int | None
    stats: dict

    @property
    def stabilized(self) -> bool:
        return self.status == "Stabilized"


def static_force_feasible(model: PlanarRobotModel, env: Environment,
                          q: np.ndarray, mode: ContactMode) -> bool:
    """Linear feasibility of holding the pose statically with the mode's forces.

    G(q) = B u + J_sigma^T lam with torque limits and linearized (planar,
    exact) friction cones; solved as an LP feasibility problem.
    """
    pts = mode.active_points(model)
    _, G = model.bias_terms(q, np.zeros(model.n))
    n, m = model.n, model.m
    k = len(pts)
    if k == 0:
        # no contacts: only a free-fall wrench balances, so require weightless base rows
        return bool(np.max(np.abs(G[:3])) < 1e-9)
    J = model.contact_jacobian(q, env)
    rows = np.stack([J[2 * p + r] for p in pts for r in (0, 1)])
    nv = m + 2 * k
    A_eq = np.zeros((n, nv))
    for j, col in enumerate(model.arrays.act_joint):
        A_eq[col, j] = 1.0
    A_eq[:, m:] = rows.T
    b_eq = G
    # cones: lam_t - mu lam_n <= 0, -lam_t - mu lam_n <= 0
    mu = env.mu
    A_ub = np.zeros((2 * k, nv))
    for i in range(k):
        A_ub[2 * i, m + 2 * i] = 1.0
        A_ub[2 * i, m + 2 * i + 1] = -mu
        A_ub[2 * i + 1, m + 2 * i] = -1.0
        A_ub[2 * i + 1, m + 2 * i + 1] = -mu
    bounds = [(-model.u_max[j], model.u_max[j]) for j in range(m)]
    for _ in range(k):
        bounds += [(-model.force_bound, model.force_bound), (0.0, model.force_bound)]
    res = linprog(np.zeros(nv), A_ub=A_ub, b_ub=np.zeros(2 * k),
                  A_eq=A_eq, b_eq=b_eq, bounds=bounds, method="highs")
    return bool(res.success)


class Planner:
    def __init__(self, model: PlanarRobotModel, env: Environment,
                 options: PlannerOptions | None = None):
        self.model = model
        self.env = env
        self.opt = options or PlannerOptions()
        self.events: list[dict] = []
        self.solves_attempted = 0

    # -- logging -----------------------------------------------------------

    def _log(self, kind: str, **fields):
        self.events.append({"event": kind, **fields})

    # -- trajectory optimizations -------------------------------------------

    def _solve_spec(self, spec: TransitionSpec):
        """Duration sweep over the schedule; first feasible solve wins."""
        try:
            tnlp = TranscribedNLP(self.model, self.env, spec, self.opt.nd,
                                  options=self.opt.transcription)
        except InfeasibleSpec as exc:
            self._log("solve-result", kind=spec.kind, outcome="infeasible-spec",
                      detail=str(exc))
            return None

        def attempt(duration: float):
            self.solves_attempted += 1
            z0 = build_seed(tnlp, duration)
            problem = NLPProblem(
                dim=tnlp.layout.size, objective=tnlp.objective,
                equality=lambda z: tnlp.evaluate(z)[1],
                inequality=lambda z: tnlp.evaluate(z)[2],
                lb=tnlp.lb, ub=tnlp.ub, x0=z0,
                jacobians=tnlp.jacobians, combined=tnlp.evaluate,
                x_scale=tnlp.variable_scale(),
            )
            return solve(problem, self.opt.solver)

        try:
            duration, index, report = seed_sweep(self.opt.schedule, attempt)
        except NoSeedWorked as exc:
            self._log("solve-result", kind=spec.kind, outcome="no-seed",
                      attempts=exc.attempts)
            return None
        traj = tnlp.trajectory(report.z)
        self._log("solve-result", kind=spec.kind, outcome=report.status,
                  duration=duration, sweep_index=index,
                  objective=report.objective, violation=report.max_violation)
        return traj

    def opt_self_motion(self, node: TreeNode):
        """Fixed-mode stabilization; trivial zero-length result if already stationary."""
        if node.ke < self.opt.eps_ke:
            return CollocationTrajectory(
                h=0.0, qs=[node.state.q], qds=[node.state.qd],
                us=[np.zeros(self.model.m)], lams=[np.zeros(self.model.l)],
                mode=node.mode)
        spec = TransitionSpec(node.state, node.mode, node.mode, "self_motion")
        self._log("solve-start", kind="self_motion", node=node.id,
                  mode=node.mode.label(self.model))
        return self._solve_spec(spec)

    def opt_transition_motion(self, node: TreeNode, goal_mode: ContactMode):
        kind = "add_contact" if goal_mode.count() > node.mode.count() else "remove_contact"
        spec = TransitionSpec(node.state, node.mode, goal_mode, kind)
        self._log("solve-start", kind=kind, node=node.id,
                  mode=node.mode.label(self.model),
                  goal=goal_mode.label(self.model))
        traj = self._solve_spec(spec)
        if traj is None:
            return None
        if kind == "remove_contact":
            end = traj.end_state()
            if not static_force_feasible(self.model, self.env, end.q, goal_mode):
                self._log("solve-result", kind=kind, outcome="static-force-infeasible")
                return None
        return traj

    # -- tree search ---------------------------------------------------------

    def expand(self, tree: TransitionTree, node: TreeNode) -> list[TreeNode]:
        """Try every adjacent mode; successful solves become children."""
        node.expanded = True
        goals = adjacent_modes(node.mode)

        def run(goal):
            return self.opt_transition_motion(node, goal)

        if self.opt.threads > 1:
            with ThreadPoolExecutor(max_workers=min(self.opt.threads, len(goals))) as ex:
                results = list(ex.map(run, goals))
        else:
            results = [run(g) for g in goals]

        children = []
        for goal, traj in zip(goals, results):
            if traj is None:
                continue
            end = traj.end_state()
            q, qd = end.q, end.qd
            if goal.count() > node.mode.count():
                try:
                    res = impact_map(self.model, q, qd, goal, self.env)
                except SingularImpact as exc:
                    self._log("impact", node=node.id, goal=goal.label(self.model),
                              outcome="singular", detail=str(exc))
                    continue
                self._log("impact", node=node.id, goal=goal.label(self.model),
                          energy_before=res.energy_before,
                          energy_after=res.energy_after,
                          cone_consistent=res.cone_consistent)
                qd = res.post_velocity
            state = RobotState(q, qd)
            ke = self.model.kinetic_energy(state)
            child = TreeNode(id=-1, mode=goal, state=state, ke=ke,
                             depth=node.depth + 1, parent=node.id, incoming=traj)
            tree.add(child)
            node.children.append(child.id)
            children.append(child)
        return children

    def plan(self, x0: RobotState, sigma0: ContactMode) -> PlanResult:
        t_start = time.perf_counter()
        self.events = []
        self.solves_attempted = 0
        self._validate_start(x0, sigma0)

        tree = TransitionTree()
        root = TreeNode(id=-1, mode=sigma0, state=x0,
                        ke=self.model.kinetic_energy(x0), depth=0)
        tree.add(root)
        counter = 0
        frontier: list[tuple[float, int, int]] = []
        heapq.heappush(frontier, (root.ke, counter, root.id))
        expansions = 0
        status = "NoSolution"
        terminal = None

        while frontier:
            if time.perf_counter() - t_start > self.opt.wall_time:
                status = "BudgetExhausted"
                break
            ke, _, nid = heapq.heappop(frontier)
            node = tree.nodes[nid]
            self._log("pop", node=nid, ke=ke, mode=node.mode.label(self.model),
                      depth=node.depth)
            y_self = self.opt_self_motion(node)
            if y_self is not None:
                end_ke = self.model.kinetic_energy(y_self.end_state())
                if end_ke < self.opt.eps_ke:
                    node.self_motion = y_self
                    terminal = nid
                    status = "Stabilized"
                    self._log("terminate", node=nid, ke=end_ke)
                    break
            if node.depth >= self.opt.max_depth:
                continue
            if expansions >= self.opt.max_expansions:
                status = "BudgetExhausted"
                break
            expansions += 1
            for child in self.expand(tree, node):
                counter += 1
                heapq.heappush(frontier, (child.ke, counter, child.id))

        modes: list[ContactMode] = []
        trajectories: list[CollocationTrajectory] = []
        if status == "Stabilized":
            path = tree.path_to_root(terminal)
            modes = [tree.nodes[i].mode for i in path]
            trajectories = [tree.nodes[i].incoming for i in path[1:]]
            trajectories.append(tree.nodes[terminal].self_motion)
        stats = {
            "nodes_expanded": expansions,
            "nodes_created": len(tree.nodes),
            "solves_attempted": self.solves_attempted,
            "wall_time": time.perf_counter() - t_start,
        }
        self._log("terminate", status=status, **{k: v for k, v in stats.items()
                                                 if k != "wall_time"})
        return PlanResult(status, modes, trajectories, tree, terminal, stats)

    def _validate_start(self, x0: RobotState, sigma0: ContactMode):
        pts = sigma0.active_points(self.model)
        if len(pts) == 0:
            return
        phi = self.model.signed_distances(self.env, x0.q)[pts]
        J = self.model.contact_jacobian(x0.q, self.env)
        rows = np.stack([J[2 * p + r] for p in pts for r in (0, 1)])
        worst = max(float(np.max(np.abs(phi))), float(np.max(np.abs(rows @ x0.qd))))
        if worst > 1e-6:
            raise InvalidStart(
                f"initial state violates mode {sigma0.label(self.model)} "
                f"kinematics by {worst:.2e}")


def export_dot(model: PlanarRobotModel, result: PlanResult) -> str:
    """Graphviz view of the transition tree, colored by node role."""
    lines = ["digraph transition_tree {", "  rankdir=TB;",
             '  node [style=filled, fontname="Helvetica"];']
    on_path = set()
    if result.terminal_node is not None:
        on_path = set(result.tree.path_to_root(result.terminal_node))
    for node in result.tree.nodes:
        if node.id == result.terminal_node:
            color = "lightblue"
        elif node.id == 0:
            color = "gold"
        elif node.children:
            color = "palegreen"
        elif node.expanded:
            color = "lightcoral"
        else:
            color = "lightgray"
        label = f"{node.mode.label(model)}\\n{node.ke:.2f} J"
        lines.append(f'  n{node.id} [label="{label}", fillcolor={color}];')
    for node in result.tree.nodes:
        if node.parent is not None:
            style = ' [penwidth=2, color="darkorange"]' if (
                node.parent in on_path and node.id in on_path) else ""
            lines.append(f"  n{node.parent} -> n{node.id}{style};")
    lines.append("}")
    return "\n".join(lines) + "\n"
