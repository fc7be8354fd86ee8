import numpy as np
import pytest

from reachmap.geometry import (R2, SE2, Pose, compose, inverse,
                               pose_from_vector)
from reachmap.models import RbfSvmClassifier, mirror_se2
from reachmap.planner import (ParamSpec, PlanProblem, ReachConstraint,
                              SqpConfig, build_local_qp, q_adj, sqp_solve)


def single_sv_model(x1, gamma=1.0, rho=0.0):
    m = RbfSvmClassifier(gamma=gamma, offset=rho)
    m.support_inputs_ = np.atleast_2d(np.asarray(x1, dtype=float))
    m.coef_ = np.array([1.0])
    m.dual_coef_ = m.coef_
    m.alpha_ = np.abs(m.coef_)
    m.support_labels_ = np.array([1])
    m.intercept_ = 0.0
    return m


class TestQuadraticStructure:
    def test_chained_difference_blocks(self):
        I = np.eye(2)
        Z = np.zeros((2, 2))
        expected = np.block([[I, -I, Z],
                             [-I, 2 * I, -I],
                             [Z, -I, I]])
        assert np.array_equal(q_adj(3, 2), expected)

    def test_sequential_objective_matrix(self):
        prob = PlanProblem(variant="sequential", space=R2,
                           init_poses=np.zeros((3, 2)), targets={})
        cfg = SqpConfig(lambda_reg=1.0)
        qp = build_local_qp(prob, prob.init_poses, cfg=cfg)
        assert np.allclose(qp.Q, q_adj(3, 2) + cfg.reg * np.eye(6))
        poses = np.arange(6.0).reshape(3, 2)
        qp2 = build_local_qp(prob, poses, cfg=cfg)
        assert np.allclose(qp2.c, q_adj(3, 2) @ poses.ravel())

    def test_simultaneous_objective_blocks(self):
        prob = PlanProblem(variant="simultaneous", space=R2,
                           init_poses=np.zeros((2, 2)),
                           targets={0: [0.0, 0.0], 1: [1.0, 2.0]},
                           target_weights={0: 0.0})
        cfg = SqpConfig()
        qp = build_local_qp(prob, prob.init_poses, cfg=cfg)
        assert np.allclose(qp.Q[:2, :2], cfg.reg * np.eye(2))
        assert np.allclose(qp.Q[2:, 2:], np.eye(2) + cfg.reg * np.eye(2))
        assert np.allclose(qp.Q[:2, 2:], 0.0)
        assert np.allclose(qp.c, [0.0, 0.0, -1.0, -2.0])

    def test_trust_region_box(self):
        prob = PlanProblem(variant="basic", space=SE2,
                           init_poses=[[0.0, 0.0, 0.0]], targets={})
        cfg = SqpConfig(trust_pos=0.1, trust_ang=0.2)
        qp = build_local_qp(prob, prob.init_poses, cfg=cfg)
        assert np.allclose(qp.upper, [0.1, 0.1, 0.2])
        assert np.allclose(qp.lower, [-0.1, -0.1, -0.2])
        qp_half = build_local_qp(prob, prob.init_poses, cfg=cfg,
                                 radius_scale=0.5)
        assert np.allclose(qp_half.upper, [0.05, 0.05, 0.1])


class TestConstraintLinearization:
    def test_absolute_row_value_and_gradient(self):
        # one support vector at the origin: value exp(-|r|^2), known gradient
        m = single_sv_model([0.0, 0.0])
        prob = PlanProblem(variant="basic", space=R2,
                           init_poses=[[1.0, 0.0]], targets={},
                           constraints=[ReachConstraint(kind="abs", i=0,
                                                        model=m)])
        qp = build_local_qp(prob, prob.init_poses)
        assert qp.b[0] == pytest.approx(-np.exp(-1.0))
        assert np.allclose(qp.A[0], [-2 * np.exp(-1.0), 0.0])

    def test_offset_shifts_row_rhs_only(self):
        plain = single_sv_model([0.0, 0.0])
        lifted = single_sv_model([0.0, 0.0], rho=0.5)
        def mk(m):
            prob = PlanProblem(
                variant="basic", space=R2, init_poses=[[1.0, 0.0]],
                targets={},
                constraints=[ReachConstraint(kind="abs", i=0, model=m)])
            return build_local_qp(prob, prob.init_poses)
        qa, qb = mk(plain), mk(lifted)
        assert qb.b[0] == pytest.approx(qa.b[0] - 0.5)
        assert np.allclose(qa.A[0], qb.A[0])

    @pytest.mark.parametrize("kind", ["rel", "abs"])
    def test_rows_match_finite_differences(self, kind):
        rng = np.random.default_rng(17)
        sv = rng.normal(size=4, scale=0.5)
        m = single_sv_model(sv, gamma=0.7)
        h = 1e-6
        for _ in range(20):
            poses = rng.uniform(-1.0, 1.0, size=(2, 3))
            if kind == "rel":
                cons = [ReachConstraint(kind="rel", i=0, j=1, model=m)]
            else:
                cons = [ReachConstraint(kind="abs", i=1, model=m)]
            prob = PlanProblem(variant="sequential", space=SE2,
                               init_poses=poses, targets={},
                               constraints=cons)
            row = build_local_qp(prob, poses).A[0]
            val = lambda P: -build_local_qp(
                PlanProblem(variant="sequential", space=SE2, init_poses=P,
                            targets={}, constraints=cons), P).b[0]
            for k in range(6):
                d = np.zeros(6)
                d[k] = h
                fd = (val(poses + d.reshape(2, 3))
                      - val(poses - d.reshape(2, 3))) / (2 * h)
                assert abs(row[k] - fd) <= 1e-5 * max(1.0, abs(fd))

    def test_trajectory_row_matches_finite_differences(self):
        rng = np.random.default_rng(23)
        m = single_sv_model(rng.normal(size=4, scale=0.5), gamma=0.7)
        traj = lambda s: np.array([0.3 * np.sin(s), 0.4 - 0.2 * np.cos(s), s])
        dtraj = lambda s: np.array([0.3 * np.cos(s), 0.2 * np.sin(s), 1.0])
        poses = rng.uniform(-0.5, 0.5, size=(1, 3))
        cons = [ReachConstraint(kind="traj", i=0, phase=0, model=m)]

        def make(s0):
            prob = PlanProblem(variant="sequential_param", space=SE2,
                               init_poses=poses, targets={}, constraints=cons,
                               param=ParamSpec(traj=traj, dtraj=dtraj,
                                               s_init=[s0]))
            return build_local_qp(prob, poses, s=[s0])

        s0, h = 0.6, 1e-6
        row = make(s0).A[0]
        fd = (-make(s0 + h).b[0] - -make(s0 - h).b[0]) / (2 * h)
        assert row[3] == pytest.approx(fd, abs=1e-5)


class TestMirroredMap:
    def test_value_identity(self, footstep_svm):
        right = mirror_se2(footstep_svm)
        X = np.random.default_rng(2).uniform(-1, 1, size=(50, 4))
        flipped = X * np.array([1.0, -1.0, 1.0, -1.0])
        assert np.allclose(right.decision_function(X),
                           footstep_svm.decision_function(flipped))

    def test_gradient_identity(self, footstep_svm):
        right = mirror_se2(footstep_svm)
        x = np.array([0.2, -0.15, 0.98, 0.2])
        flipped = x * np.array([1.0, -1.0, 1.0, -1.0])
        expected = footstep_svm.gradient(flipped) * [1.0, -1.0, 1.0, -1.0]
        assert np.allclose(right.gradient(x), expected)
        assert right.gradient(x).shape == (4,)


class TestBasicProjection:
    def test_reachable_target_hit_exactly(self, arm_svm):
        prob = PlanProblem(variant="basic", space=R2,
                           init_poses=[[0.0, 1.5]],
                           targets={0: [0.8, 1.2]},
                           constraints=[ReachConstraint(kind="abs", i=0,
                                                        model=arm_svm)])
        res = sqp_solve(prob)
        assert res.converged
        assert res.target_residuals[0] <= 1e-3
        assert arm_svm.decision_function([res.poses[0]])[0] >= -1e-6

    def test_unreachable_target_projected_to_boundary(self, arm_svm):
        target = np.array([0.0, 3.0])
        prob = PlanProblem(variant="basic", space=R2,
                           init_poses=[[0.0, 1.5]],
                           targets={0: target},
                           constraints=[ReachConstraint(kind="abs", i=0,
                                                        model=arm_svm)])
        res = sqp_solve(prob)
        assert res.converged
        f = arm_svm.decision_function([res.poses[0]])[0]
        assert abs(f) <= 1e-3
        # the landing spot matches a dense-grid projection within two cells
        g = np.linspace(-2.2, 2.2, 100)
        pts = np.stack(np.meshgrid(g, g, indexing="ij"), -1).reshape(-1, 2)
        pos = pts[arm_svm.decision_function(pts) >= 0]
        grid_dist = np.min(np.linalg.norm(pos - target, axis=1))
        cell = g[1] - g[0]
        assert abs(res.target_residuals[0] - grid_dist) <= 2 * cell

    def test_sequential_single_pose_matches_basic(self, arm_svm):
        cons = lambda: [ReachConstraint(kind="abs", i=0, model=arm_svm)]
        basic = PlanProblem(variant="basic", space=R2,
                            init_poses=[[0.0, 1.5]], targets={0: [0.8, 1.2]},
                            constraints=cons())
        seq = PlanProblem(variant="sequential", space=R2,
                          init_poses=[[0.0, 1.5]], targets={0: [0.8, 1.2]},
                          constraints=cons())
        a = sqp_solve(basic)
        b = sqp_solve(seq)
        assert np.allclose(a.poses, b.poses, atol=1e-6)

    def test_goal_equals_start_footsteps(self, footstep_svm):
        from reachmap.planner import plan_footsteps
        maps = {"left_from_right": footstep_svm,
                "right_from_left": mirror_se2(footstep_svm)}
        start_left = [0.0, 0.09, 0.0]
        start_right = [0.0, -0.09, 0.0]
        res = plan_footsteps(start_left, start_right, start_left, start_right,
                             n_steps=2, maps=maps)
        assert res.converged
        assert np.all(np.abs(res.poses[:, 0]) <= 0.05)
        assert res.constraint_values.min() >= -1e-6

    def test_frozen_parameter_stays_at_initialization(self, footstep_svm,
                                                      hand_svm):
        from reachmap.planner import plan_with_trajectory_param
        maps = {"left_from_right": footstep_svm,
                "right_from_left": mirror_se2(footstep_svm)}
        traj = lambda s: np.array([0.5 + 0.5 * np.sin(s),
                                   0.8 - 0.5 * np.cos(s), s])
        dtraj = lambda s: np.array([0.5 * np.cos(s), 0.5 * np.sin(s), 1.0])
        res = plan_with_trajectory_param(
            [0.0, 0.09, 0.0], [0.0, -0.09, 0.0],
            [1.0, 0.09, 0.0], [1.0, -0.09, 0.0],
            n_steps=6, foot_maps=maps, hand_map=hand_svm,
            traj=traj, dtraj=dtraj, s_start=0.0, s_goal=np.pi / 2,
            cfg=SqpConfig(trust_param=1e-12))
        assert np.allclose(res.s, np.linspace(0.0, np.pi / 2, 8), atol=1e-9)

    def test_infinite_init_rejected(self, arm_svm):
        prob = PlanProblem(variant="basic", space=R2,
                           init_poses=[[np.inf, 0.0]], targets={0: [0, 0]},
                           constraints=[ReachConstraint(kind="abs", i=0,
                                                        model=arm_svm)])
        with pytest.raises(ValueError):
            sqp_solve(prob)
