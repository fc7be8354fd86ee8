"""Differentiable reachability maps for task-space motion planning.

Learn scalar fields that are positive exactly on end-effector-reachable
poses from kinematically generated samples, and use them as inequality
constraints in SQP-style planning (placement, footsteps, contact
sequences, parameterized trajectories).
"""

from .geometry import (R2, R3, SE2, SE3, Pose, TaskSpace, compose, encode,
                       encode_rel, inverse, jac_rel, wrap_angle)
from .kinematics import (GridOracle, IkOptions, SerialChain, arm_2dof, fk,
                         fk_jacobian, hand_chain, leg_chain, load_chain,
                         oracle_reachable, planar_chain, save_chain,
                         self_collision, solve_ik)
from .models import (MirroredMap, MlpClassifier, OneClassRbfSvm,
                     RbfSvmClassifier, is_reachable, load_model, mirror_se2,
                     save_model)
from .planner import (ParamSpec, PlanProblem, PlanResult, ReachConstraint,
                      SqpConfig, build_local_qp, plan_footsteps,
                      plan_placement, plan_with_trajectory_param, sqp_solve)
from .qp import QpProblem, QpSolution, solve_qp
from .sampling import (SampleSet, load_samples, sample_fk, sample_footsteps,
                       sample_ik, save_samples, workspace_bounds)
from .evaluation import (ConvexHullClassifier, EvalReport, KnnClassifier,
                         compute_iou, offset_sweep)

__version__ = "0.1.0"
