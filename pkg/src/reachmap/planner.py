"""SQP outer loop over reachability-constrained task-space plans.

Four problem variants share one machinery: Basic (project a single pose
onto the predicted-reachable set while tracking a target), Simultaneous
(all end-effector poses reachable from one base pose), Sequential (each
pose reachable from its predecessor), and SequentialWithParam (Sequential
plus a scalar trajectory parameter per phase driving a predefined hand
path).  Each iteration linearizes every reachability constraint through
the model gradient and the relative-pose Jacobians, assembles a strictly
convex QP with trust-region box bounds on the update step, and accepts or
rejects the step based on constraint violation and objective progress.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import (Pose, TaskSpace, encode, encode_rel, jac_encode,
                       jac_rel, pose_from_vector, wrap_angle)
from .qp import QpProblem, QpSolution, solve_qp


@dataclass
class SqpConfig:
    lambda_reg: float = 1.0
    trust_pos: float = 0.1
    trust_ang: float = 0.2
    trust_param: float = 0.05
    max_iters: int = 50
    step_tol: float = 1e-5
    constraint_tol: float = 1e-6
    qp_tol: float = 1e-9
    reg: float = 1e-8
    merit_penalty: float = 1e3

    def __post_init__(self):
        if min(self.trust_pos, self.trust_ang) <= 0:
            raise ValueError("trust radii must be positive")
        if min(self.step_tol, self.constraint_tol) <= 0:
            raise ValueError("tolerances must be positive")

    def pose_radius(self, space: TaskSpace) -> np.ndarray:
        if space.kind == "SE2":
            return np.array([self.trust_pos, self.trust_pos, self.trust_ang])
        return np.full(space.pose_dim, self.trust_pos)


@dataclass(frozen=True)
class ReachConstraint:
    """One linearized inequality f_R(...) >= 0.

    kind "rel":  model input is encode_rel(r[i], r[j])
    kind "abs":  model input is encode(r[i])
    kind "traj": model input is encode_rel(r[i], traj(s[phase]))
    """

    kind: str
    i: int
    j: int = -1
    model: object = None
    phase: int = -1


@dataclass
class ParamSpec:
    """Scalar trajectory parameters s_0..s_P tied to "traj" constraints."""

    traj: callable  # s -> pose vector (M_r)
    dtraj: callable  # s -> d pose vector / d s
    s_init: np.ndarray
    s_targets: dict = field(default_factory=dict)
    smooth_weight: float = 1.0
    monotone: bool = True

    def __post_init__(self):
        self.s_init = np.atleast_1d(np.asarray(self.s_init, dtype=float))


@dataclass
class PlanProblem:
    variant: str  # basic | simultaneous | sequential | sequential_param
    space: TaskSpace
    init_poses: np.ndarray  # (N+1, M_r)
    targets: dict  # pose index -> target vector
    target_weights: dict = field(default_factory=dict)
    constraints: list = field(default_factory=list)
    linear_constraints: list = field(default_factory=list)  # (idx, a, rhs): a.r >= rhs
    param: ParamSpec = None

    def __post_init__(self):
        self.init_poses = np.atleast_2d(np.asarray(self.init_poses, dtype=float))
        if self.init_poses.shape[1] != self.space.pose_dim:
            raise ValueError("pose vectors must have length M_r")
        self.targets = {int(k): np.asarray(v, dtype=float)
                        for k, v in self.targets.items()}

    @property
    def n_poses(self):
        return len(self.init_poses)


@dataclass
class PlanResult:
    poses: np.ndarray
    s: np.ndarray
    converged: bool
    iterations: int
    constraint_values: np.ndarray
    objective_trace: list
    target_residuals: dict

    def pose(self, i, space: TaskSpace) -> Pose:
        return pose_from_vector(space, self.poses[i])


def q_adj(n_blocks: int, m: int) -> np.ndarray:
    """Chained-difference quadratic form: block tridiagonal with I/-I."""
    Q = np.zeros((n_blocks * m, n_blocks * m))
    I = np.eye(m)
    for i in range(n_blocks - 1):
        a, b = i * m, (i + 1) * m
        Q[a:a + m, a:a + m] += I
        Q[b:b + m, b:b + m] += I
        Q[a:a + m, b:b + m] -= I
        Q[b:b + m, a:a + m] -= I
    return Q


def _constraint_value_and_row(con: ReachConstraint, problem: PlanProblem,
                              poses, s, n_vars, m):
    """Evaluate one reachability constraint and its linearization row."""
    space = problem.space
    row = np.zeros(n_vars)
    if con.kind == "abs":
        p = pose_from_vector(space, poses[con.i])
        x = encode(p)
        val = float(con.model.decision_function(x)[0])
        gf = con.model.gradient(x)
        row[con.i * m:(con.i + 1) * m] = gf @ jac_encode(p)
        return val, row
    if con.kind == "rel":
        p0 = pose_from_vector(space, poses[con.i])
        p1 = pose_from_vector(space, poses[con.j])
        x = encode_rel(p0, p1)
        val = float(con.model.decision_function(x)[0])
        gf = con.model.gradient(x)
        j0, j1 = jac_rel(p0, p1)
        row[con.i * m:(con.i + 1) * m] += gf @ j0
        row[con.j * m:(con.j + 1) * m] += gf @ j1
        return val, row
    if con.kind == "traj":
        spec = problem.param
        sk = s[con.phase]
        p0 = pose_from_vector(space, poses[con.i])
        ph = pose_from_vector(space, spec.traj(sk))
        x = encode_rel(p0, ph)
        val = float(con.model.decision_function(x)[0])
        gf = con.model.gradient(x)
        j0, j1 = jac_rel(p0, ph)
        row[con.i * m:(con.i + 1) * m] += gf @ j0
        row[problem.n_poses * m + con.phase] = gf @ (j1 @ spec.dtraj(sk))
        return val, row
    raise ValueError(f"unknown constraint kind {con.kind!r}")


def _objective_terms(problem: PlanProblem, cfg: SqpConfig, poses, s):
    """Nonlinear objective value (for step acceptance)."""
    lam = cfg.lambda_reg
    obj = 0.0
    for i, trg in problem.targets.items():
        w = problem.target_weights.get(i, 1.0)
        obj += 0.5 * w * float(np.sum((poses[i] - trg) ** 2))
    if problem.variant in ("sequential", "sequential_param"):
        d = np.diff(poses, axis=0)
        obj += 0.5 * lam * float(np.sum(d * d))
    if problem.param is not None:
        spec = problem.param
        for k, trg in spec.s_targets.items():
            obj += 0.5 * float((s[k] - trg) ** 2)
        ds = np.diff(s)
        obj += 0.5 * spec.smooth_weight * float(np.sum(ds * ds))
    return obj


def build_local_qp(problem: PlanProblem, poses, s=None,
                   cfg: SqpConfig = None, radius_scale: float = 1.0) -> QpProblem:
    """Assemble the local QP around the current poses (and parameters).

    Variables stack the pose updates block by block, followed by one
    scalar update per trajectory parameter.  Trust radii enter as box
    bounds; the Hessian carries a small diagonal regularization.
    """
    cfg = cfg or SqpConfig()
    poses = np.atleast_2d(np.asarray(poses, dtype=float))
    m = problem.space.pose_dim
    n_p = problem.n_poses
    n_s = len(problem.param.s_init) if problem.param is not None else 0
    if s is None and n_s:
        s = problem.param.s_init
    s = np.atleast_1d(np.asarray(s, dtype=float)) if n_s else np.zeros(0)
    n_vars = n_p * m + n_s
    lam = cfg.lambda_reg

    Q = np.zeros((n_vars, n_vars))
    c = np.zeros(n_vars)
    for i, trg in problem.targets.items():
        w = problem.target_weights.get(i, 1.0)
        sl = slice(i * m, (i + 1) * m)
        Q[sl, sl] += w * np.eye(m)
        c[sl] += w * (poses[i] - trg)
    if problem.variant in ("sequential", "sequential_param"):
        Qa = q_adj(n_p, m)
        Q[:n_p * m, :n_p * m] += lam * Qa
        c[:n_p * m] += lam * (Qa @ poses.ravel())
    if n_s:
        spec = problem.param
        base = n_p * m
        for k, trg in spec.s_targets.items():
            Q[base + k, base + k] += 1.0
            c[base + k] += s[k] - trg
        Qs = q_adj(n_s, 1) if n_s > 1 else np.zeros((1, 1))
        Q[base:, base:] += spec.smooth_weight * Qs
        c[base:] += spec.smooth_weight * (Qs @ s)
    Q += cfg.reg * np.eye(n_vars)

    rows, rhs = [], []
    for con in problem.constraints:
        val, row = _constraint_value_and_row(con, problem, poses, s, n_vars, m)
        rows.append(row)
        rhs.append(-val)
    for idx, a, r0 in problem.linear_constraints:
        a = np.asarray(a, dtype=float)
        row = np.zeros(n_vars)
        row[idx * m:idx * m + len(a)] = a
        rows.append(row)
        rhs.append(r0 - float(a @ poses[idx][:len(a)]))
    if n_s and problem.param.monotone:
        base = n_p * m
        for k in range(n_s - 1):
            row = np.zeros(n_vars)
            row[base + k + 1] = 1.0
            row[base + k] = -1.0
            rows.append(row)
            rhs.append(-(s[k + 1] - s[k]))

    A = np.vstack(rows) if rows else None
    b = np.array(rhs) if rows else None
    pr = cfg.pose_radius(problem.space) * radius_scale
    radius = np.concatenate([np.tile(pr, n_p),
                             np.full(n_s, cfg.trust_param * radius_scale)])
    return QpProblem(Q=Q, c=c, A=A, b=b, lower=-radius, upper=radius)


def _relaxed_qp(qp: QpProblem, penalty: float = 1e4) -> QpProblem:
    """Feasibility-restoring variant: one shared slack on every inequality
    row, penalized linearly so the step still moves toward feasibility
    when the linearized constraints cannot be met inside the trust box."""
    n = len(qp.c)
    Q = np.zeros((n + 1, n + 1))
    Q[:n, :n] = qp.Q
    Q[n, n] = 1e-6
    c = np.concatenate([qp.c, [penalty]])
    A = np.hstack([qp.A, np.ones((len(qp.b), 1))])
    lower = np.concatenate([qp.lower, [0.0]])
    # at z = 0 a slack of max(b) satisfies every row, so this box never binds
    upper = np.concatenate([qp.upper, [max(float(np.max(qp.b)), 0.0) + 1.0]])
    return QpProblem(Q=Q, c=c, A=A, b=qp.b, lower=lower, upper=upper)


def _constraint_violation(problem, cfg, poses, s):
    worst = 0.0
    values = []
    m = problem.space.pose_dim
    n_s = len(s)
    n_vars = problem.n_poses * m + n_s
    for con in problem.constraints:
        val, _ = _constraint_value_and_row(con, problem, poses, s, n_vars, m)
        values.append(val)
        worst = max(worst, -val)
    for idx, a, r0 in problem.linear_constraints:
        a = np.asarray(a, dtype=float)
        worst = max(worst, r0 - float(a @ poses[idx][:len(a)]))
    if n_s and problem.param is not None and problem.param.monotone:
        for k in range(n_s - 1):
            worst = max(worst, s[k] - s[k + 1])
    return worst, np.array(values)


def sqp_solve(problem: PlanProblem, cfg: SqpConfig = None) -> PlanResult:
    """Iterate local QPs with trust-region safeguarding.

    A step is accepted when the worst constraint violation does not grow
    or the objective decreases; otherwise the trust radius is halved and
    the step recomputed (restored to its base value after two accepted
    steps).  Never raises on non-convergence: the result carries the
    trace and converged=False.
    """
    cfg = cfg or SqpConfig()
    poses = problem.init_poses.copy()
    s = (problem.param.s_init.copy() if problem.param is not None
         else np.zeros(0))
    if not np.all(np.isfinite(poses)):
        raise ValueError("initial pose guesses must be finite")
    scale = 1.0
    streak = 0
    trace = []
    converged = False
    it = 0
    viol, values = _constraint_violation(problem, cfg, poses, s)
    obj = _objective_terms(problem, cfg, poses, s)
    trace.append(obj)
    while it < cfg.max_iters:
        it += 1
        qp = build_local_qp(problem, poses, s, cfg, radius_scale=scale)
        sol: QpSolution = solve_qp(qp, tol=cfg.qp_tol)
        if sol.status == "infeasible" and qp.A is not None:
            sol = solve_qp(_relaxed_qp(qp), tol=cfg.qp_tol)
            sol = QpSolution(z=sol.z[:-1], status=sol.status,
                             kkt_residual=sol.kkt_residual,
                             active_set=sol.active_set,
                             iterations=sol.iterations)
        if sol.status == "infeasible":
            scale *= 0.5
            streak = 0
            if scale < 1e-8:
                break
            continue
        dz = sol.z
        m = problem.space.pose_dim
        n_p = problem.n_poses
        cand_poses = poses + dz[:n_p * m].reshape(n_p, m)
        cand_s = s + dz[n_p * m:]
        cand_viol, cand_values = _constraint_violation(problem, cfg, cand_poses, cand_s)
        cand_obj = _objective_terms(problem, cfg, cand_poses, cand_s)
        # merit acceptance: objective progress cannot buy constraint
        # violation except at a steep exchange rate, which blocks chasing
        # an unreachable target straight through the constraint boundary
        merit = obj + cfg.merit_penalty * viol
        cand_merit = cand_obj + cfg.merit_penalty * cand_viol
        if cand_merit <= merit + 1e-12:
            poses, s = cand_poses, cand_s
            viol, values, obj = cand_viol, cand_values, cand_obj
            trace.append(obj)
            streak += 1
            if streak >= 2:
                scale = min(1.0, 2.0 * scale)
            if np.max(np.abs(dz), initial=0.0) <= cfg.step_tol:
                converged = viol <= cfg.constraint_tol
                break
        else:
            scale *= 0.5
            streak = 0
            if scale < 1e-8:
                break
    residuals = {i: float(np.linalg.norm(poses[i] - trg))
                 for i, trg in problem.targets.items()}
    return PlanResult(poses=poses, s=s, converged=converged, iterations=it,
                      constraint_values=values, objective_trace=trace,
                      target_residuals=residuals)


# ---------------------------------------------------------------------------
# High-level planning operations


def _interp_pose(a, b, frac, space: TaskSpace):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    v = a + frac * (b - a)
    if space.kind == "SE2":
        v[2] = a[2] + frac * wrap_angle(b[2] - a[2])
    return v


def _footstep_problem(space, start_left, start_right, goal_left, goal_right,
                      n_steps, maps, obstacles=None):
    if n_steps < 2:
        raise ValueError("n_steps must be >= 2")
    N = n_steps + 1
    starts = {0: np.asarray(start_left, dtype=float),
              1: np.asarray(start_right, dtype=float)}
    goals = {0: np.asarray(goal_left, dtype=float),
             1: np.asarray(goal_right, dtype=float)}
    init = np.zeros((N + 1, space.pose_dim))
    for i in range(N + 1):
        par = i % 2
        init[i] = _interp_pose(starts[par], goals[par], i / N, space)
    targets = {0: starts[0], 1: starts[1], N - 1: goals[(N - 1) % 2],
               N: goals[N % 2]}
    weights = {i: 100.0 for i in targets}
    cons = []
    for i in range(N):
        swing_left = (i + 1) % 2 == 0
        model = maps["left_from_right"] if swing_left else maps["right_from_left"]
        cons.append(ReachConstraint(kind="rel", i=i, j=i + 1, model=model))
    lin = []
    for obs in obstacles or []:
        a = np.asarray(obs["normal"], dtype=float)
        idx = obs.get("indices", "all")
        which = range(N + 1) if idx == "all" else idx
        for i in which:
            lin.append((int(i), a, float(obs["offset"])))
    return PlanProblem(variant="sequential", space=space, init_poses=init,
                       targets=targets, target_weights=weights,
                       constraints=cons, linear_constraints=lin)


def plan_footsteps(start_left, start_right, goal_left, goal_right, n_steps,
                   maps, cfg: SqpConfig = None, obstacles=None,
                   space: TaskSpace = None) -> PlanResult:
    """Sequential SE2 footstep plan; feet alternate left (even index) and
    right (odd index).  maps holds "left_from_right" and "right_from_left"
    swing-relative-to-stance reachability models."""
    from .geometry import SE2 as _SE2
    space = space or _SE2
    problem = _footstep_problem(space, start_left, start_right, goal_left,
                                goal_right, n_steps, maps, obstacles)
    return sqp_solve(problem, cfg)


def plan_placement(waypoints, base_target, model, cfg: SqpConfig = None,
                   space: TaskSpace = None, base_init=None) -> PlanResult:
    """Simultaneous problem: r_0 is the base pose, r_1..r_N track the
    waypoints subject to reachability from r_0.  The base target carries
    the (small) lambda_reg weight."""
    cfg = cfg or SqpConfig(lambda_reg=1e-2)
    from .geometry import R2 as _R2
    space = space or _R2
    waypoints = np.atleast_2d(np.asarray(waypoints, dtype=float))
    base_target = np.asarray(base_target, dtype=float)
    N = len(waypoints)
    init = np.vstack([[base_init if base_init is not None else base_target],
                      waypoints])
    targets = {0: base_target, **{i + 1: waypoints[i] for i in range(N)}}
    weights = {0: cfg.lambda_reg}
    cons = [ReachConstraint(kind="rel", i=0, j=i + 1, model=model)
            for i in range(N)]
    problem = PlanProblem(variant="simultaneous", space=space,
                          init_poses=init, targets=targets,
                          target_weights=weights, constraints=cons)
    return sqp_solve(problem, cfg)


def plan_with_trajectory_param(start_left, start_right, goal_left, goal_right,
                               n_steps, foot_maps, hand_map, traj, dtraj,
                               s_start, s_goal, cfg: SqpConfig = None,
                               space: TaskSpace = None) -> PlanResult:
    """Footstep plan plus a monotone trajectory parameter per phase.

    Phase k's support foot is pose k; the hand must reach the predefined
    trajectory point traj(s_k) from it."""
    from .geometry import SE2 as _SE2
    space = space or _SE2
    problem = _footstep_problem(space, start_left, start_right, goal_left,
                                goal_right, n_steps, foot_maps)
    problem.variant = "sequential_param"
    n = problem.n_poses
    s_init = np.linspace(s_start, s_goal, n)
    problem.param = ParamSpec(traj=traj, dtraj=dtraj, s_init=s_init,
                              s_targets={0: float(s_start), n - 1: float(s_goal)},
                              smooth_weight=0.1)
    for k in range(n):
        problem.constraints.append(
            ReachConstraint(kind="traj", i=k, phase=k, model=hand_map))
    return sqp_solve(problem, cfg)
