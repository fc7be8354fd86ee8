"""Serial kinematic chains: FK, Jacobians, damped-least-squares IK,
self-collision capsules, and a brute-force grid reachability oracle.

Chains are immutable after construction.  Revolute joints only; a chain
is "planar" when every axis is +z and every link offset is a pure
x-translation, which enables a fast vectorized FK path used by the
sampler and the grid oracle.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .geometry import (R2, R3, SE2, SE3, Pose, TaskSpace, compose,
                       matrix_to_quat, wrap_angle)


def _rot_axis(axis, angle):
    """Rodrigues rotation matrix about a unit axis."""
    a = np.asarray(axis, dtype=float)
    c, s = np.cos(angle), np.sin(angle)
    K = np.array([[0, -a[2], a[1]], [a[2], 0, -a[0]], [-a[1], a[0], 0]])
    return np.eye(3) + s * K + (1 - c) * (K @ K)


@dataclass(frozen=True)
class Joint:
    axis: tuple  # unit 3-vector
    limits: tuple  # (lo, hi) radians
    offset_xyz: tuple  # translation to the next frame, in this joint's frame
    offset_rpy: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        lo, hi = self.limits
        if not lo < hi:
            raise ValueError(f"joint limits must satisfy lo < hi, got {self.limits}")
        a = np.asarray(self.axis, dtype=float)
        if abs(np.linalg.norm(a) - 1.0) > 1e-9:
            raise ValueError("joint axis must be a unit vector")


@dataclass(frozen=True)
class Capsule:
    """Self-collision test pair: link segments link_a and link_b.

    Link k is the segment from joint k's frame origin to the next frame
    origin.  Segments intersect when their distance is below the radius sum.
    """

    link_a: int
    link_b: int
    radius_a: float
    radius_b: float


@dataclass(frozen=True)
class SerialChain:
    name: str
    space: TaskSpace
    joints: tuple
    capsules: tuple = ()
    base_pose: Pose = None

    def __post_init__(self):
        if self.base_pose is None:
            object.__setattr__(self, "base_pose", Pose.identity(self.space))
        planar = all(
            np.allclose(j.axis, (0, 0, 1)) and np.allclose(j.offset_rpy, 0)
            and j.offset_xyz[1] == 0 and j.offset_xyz[2] == 0
            for j in self.joints)
        object.__setattr__(self, "_planar", planar)

    @property
    def n_joints(self) -> int:
        return len(self.joints)

    @property
    def lower(self) -> np.ndarray:
        return np.array([j.limits[0] for j in self.joints])

    @property
    def upper(self) -> np.ndarray:
        return np.array([j.limits[1] for j in self.joints])

    def within_limits(self, q) -> bool:
        q = np.asarray(q)
        return bool(np.all(q >= self.lower - 1e-12) and np.all(q <= self.upper + 1e-12))


def planar_chain(name, link_lengths, limits, space=R2, capsules=(), base_pose=None):
    """Planar revolute chain with z axes and x-translation links."""
    joints = tuple(
        Joint(axis=(0, 0, 1), limits=tuple(lim), offset_xyz=(float(l), 0, 0))
        for l, lim in zip(link_lengths, limits, strict=True))
    return SerialChain(name=name, space=space, joints=joints,
                       capsules=tuple(capsules), base_pose=base_pose)


def _frames(chain: SerialChain, q):
    """World rotation matrices and origins of every joint frame plus the
    end-effector frame (n+1 origins)."""
    q = np.asarray(q, dtype=float)
    if chain.space.kind in ("R2", "SE2"):
        bx, by = chain.base_pose.coords[0], chain.base_pose.coords[1]
        bt = chain.base_pose.coords[2] if chain.space.kind == "SE2" else 0.0
        R = _rot_axis((0, 0, 1), bt)
        p = np.array([bx, by, 0.0])
    else:
        bc = chain.base_pose.coords
        p = np.array(bc[:3])
        R = np.eye(3) if chain.space.kind == "R3" else _rot_axis((0, 0, 1), 0)
        if chain.space.kind == "SE3":
            from .geometry import quat_to_matrix
            R = quat_to_matrix(bc[3:])
    Rs, ps = [R], [p]
    for j, qi in zip(chain.joints, q, strict=True):
        R = R @ _rot_axis(j.axis, qi)
        if any(j.offset_rpy):
            rx, ry, rz = j.offset_rpy
            Roff = (_rot_axis((0, 0, 1), rz) @ _rot_axis((0, 1, 0), ry)
                    @ _rot_axis((1, 0, 0), rx))
        else:
            Roff = None
        p = p + R @ np.asarray(j.offset_xyz, dtype=float)
        if Roff is not None:
            R = R @ Roff
        Rs.append(R)
        ps.append(p)
    return Rs, ps


def fk(chain: SerialChain, q) -> Pose:
    """End-effector pose; joint limits are not enforced here."""
    Rs, ps = _frames(chain, q)
    R, p = Rs[-1], ps[-1]
    k = chain.space.kind
    if k == "R2":
        return Pose(R2, (p[0], p[1]))
    if k == "R3":
        return Pose(R3, tuple(p))
    if k == "SE2":
        return Pose(SE2, (p[0], p[1], wrap_angle(np.arctan2(R[1, 0], R[0, 0]))))
    return Pose(SE3, tuple(np.concatenate([p, matrix_to_quat(R)])))


def fk_planar_batch(chain: SerialChain, Q) -> np.ndarray:
    """Vectorized planar FK: Q is (L, n) joint angles -> (L, 3) x, y, yaw.

    Only valid for planar chains with identity base orientation offset
    handled via the base pose.
    """
    if not chain._planar:
        raise ValueError("fk_planar_batch requires a planar chain")
    Q = np.asarray(Q, dtype=float)
    bx = chain.base_pose.coords[0]
    by = chain.base_pose.coords[1]
    bt = chain.base_pose.coords[2] if chain.space.kind == "SE2" else 0.0
    ang = bt + np.cumsum(Q, axis=1)
    lengths = np.array([j.offset_xyz[0] for j in chain.joints])
    x = bx + (np.cos(ang) * lengths).sum(axis=1)
    y = by + (np.sin(ang) * lengths).sum(axis=1)
    return np.column_stack([x, y, ang[:, -1]])


def fk_jacobian(chain: SerialChain, q) -> np.ndarray:
    """Analytic task-space Jacobian (M_r x n).

    Rows: R2 (x, y); R3 (x, y, z); SE2 (x, y, yaw); SE3 (x, y, z, wx, wy, wz)
    with the angular part in world frame.
    """
    Rs, ps = _frames(chain, q)
    p_ee = ps[-1]
    n = chain.n_joints
    lin = np.zeros((3, n))
    ang = np.zeros((3, n))
    for i, j in enumerate(chain.joints):
        a_world = Rs[i] @ np.asarray(j.axis, dtype=float)
        lin[:, i] = np.cross(a_world, p_ee - ps[i])
        ang[:, i] = a_world
    k = chain.space.kind
    if k == "R2":
        return lin[:2]
    if k == "R3":
        return lin
    if k == "SE2":
        return np.vstack([lin[:2], ang[2:3]])
    return np.vstack([lin, ang])


def _rotvec(R):
    """Rotation-vector (axis * angle) of a rotation matrix."""
    q = matrix_to_quat(R)
    w = min(1.0, max(-1.0, q[0]))
    angle = 2.0 * np.arccos(w)
    s = np.sqrt(max(0.0, 1.0 - w * w))
    if s < 1e-12:
        return 2.0 * q[1:]
    return q[1:] / s * angle


def _task_error(chain: SerialChain, current: Pose, target: Pose) -> np.ndarray:
    k = chain.space.kind
    if k in ("R2", "R3"):
        return target.array - current.array
    if k == "SE2":
        return np.array([target.coords[0] - current.coords[0],
                         target.coords[1] - current.coords[1],
                         wrap_angle(target.coords[2] - current.coords[2])])
    from .geometry import quat_to_matrix
    dp = np.array(target.coords[:3]) - np.array(current.coords[:3])
    Rt = quat_to_matrix(target.coords[3:])
    Rc = quat_to_matrix(current.coords[3:])
    return np.concatenate([dp, _rotvec(Rt @ Rc.T)])


def segment_distance(p1, p2, q1, q2) -> float:
    """Minimum distance between segments [p1, p2] and [q1, q2]."""
    p1, p2, q1, q2 = (np.asarray(v, dtype=float) for v in (p1, p2, q1, q2))
    d1, d2, r = p2 - p1, q2 - q1, p1 - q1
    a, e, f = d1 @ d1, d2 @ d2, d2 @ r
    if a < 1e-15 and e < 1e-15:
        return float(np.linalg.norm(r))
    if a < 1e-15:
        s, t = 0.0, np.clip(f / e, 0.0, 1.0)
    else:
        c = d1 @ r
        if e < 1e-15:
            t, s = 0.0, np.clip(-c / a, 0.0, 1.0)
        else:
            b = d1 @ d2
            den = a * e - b * b
            s = np.clip((b * f - c * e) / den, 0.0, 1.0) if den > 1e-15 else 0.0
            t = (b * s + f) / e
            if t < 0.0:
                t, s = 0.0, np.clip(-c / a, 0.0, 1.0)
            elif t > 1.0:
                t, s = 1.0, np.clip((b - c) / a, 0.0, 1.0)
    return float(np.linalg.norm(p1 + s * d1 - (q1 + t * d2)))


def self_collision(chain: SerialChain, q) -> bool:
    """True iff any declared capsule pair intersects at configuration q."""
    if not chain.capsules:
        return False
    _, ps = _frames(chain, q)
    for cap in chain.capsules:
        d = segment_distance(ps[cap.link_a], ps[cap.link_a + 1],
                             ps[cap.link_b], ps[cap.link_b + 1])
        if d < cap.radius_a + cap.radius_b:
            return True
    return False


@dataclass(frozen=True)
class IkOptions:
    damping: float = 0.1
    max_iters: int = 200
    tol: float = 1e-4
    restarts: int = 10
    rng_seed: int = 0

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.damping <= 0:
            raise ValueError("damping must be positive")


def _max_reach(chain: SerialChain) -> float:
    return float(sum(np.linalg.norm(j.offset_xyz) for j in chain.joints))


def _solve_ik_planar(chain: SerialChain, target: Pose, opts: IkOptions):
    """Vectorized DLS over all restarts at once (planar chains only).

    Equivalent to running the restarts serially and returning the first
    success in restart order.
    """
    rng = np.random.default_rng(opts.rng_seed)
    lo, hi = chain.lower, chain.upper
    n = chain.n_joints
    R = opts.restarts
    Q = np.empty((R, n))
    Q[0] = 0.5 * (lo + hi)
    if R > 1:
        Q[1:] = rng.uniform(lo, hi, size=(R - 1, n))
    lengths = np.array([j.offset_xyz[0] for j in chain.joints])
    bx = chain.base_pose.coords[0]
    by = chain.base_pose.coords[1]
    bt = chain.base_pose.coords[2] if chain.space.kind == "SE2" else 0.0
    se2 = chain.space.kind == "SE2"
    tgt = np.asarray(target.coords, dtype=float)
    lam2 = opts.damping ** 2
    m = 3 if se2 else 2
    eye_m = lam2 * np.eye(m)

    active = np.ones(R, dtype=bool)
    best = np.full(R, np.inf)
    stall = np.zeros(R, dtype=int)
    done_err = np.full(R, np.inf)
    for _ in range(opts.max_iters):
        idx = np.nonzero(active)[0]
        if len(idx) == 0:
            break
        q = Q[idx]
        ang = bt + np.cumsum(q, axis=1)
        ca, sa = np.cos(ang), np.sin(ang)
        x = bx + (ca * lengths).sum(axis=1)
        y = by + (sa * lengths).sum(axis=1)
        ex = tgt[0] - x
        ey = tgt[1] - y
        if se2:
            dt = tgt[2] - ang[:, -1]
            e = np.stack([ex, ey, np.arctan2(np.sin(dt), np.cos(dt))], axis=1)
        else:
            e = np.stack([ex, ey], axis=1)
        err = np.linalg.norm(e, axis=1)
        done_err[idx] = err
        conv = err <= opts.tol
        worse = err > best[idx] - 1e-12
        stall[idx] = np.where(worse, stall[idx] + 1, 0)
        best[idx] = np.minimum(best[idx], err)
        drop = conv | (stall[idx] >= 8)
        if np.any(drop):
            active[idx[drop]] = False
            idx = idx[~drop]
            if len(idx) == 0:
                continue
            q, ca, sa, e = q[~drop], ca[~drop], sa[~drop], e[~drop]
        # planar Jacobian via reversed cumulative sums
        rs = np.flip(np.cumsum(np.flip(sa * lengths, 1), axis=1), 1)
        rc = np.flip(np.cumsum(np.flip(ca * lengths, 1), axis=1), 1)
        if se2:
            J = np.stack([-rs, rc, np.ones_like(rs)], axis=1)
        else:
            J = np.stack([-rs, rc], axis=1)
        JJt = J @ J.transpose(0, 2, 1) + eye_m
        w = np.linalg.solve(JJt, e[:, :, None])
        dq = (J.transpose(0, 2, 1) @ w)[:, :, 0]
        Q[idx] = np.clip(q + dq, lo, hi)
    for r in range(R):
        if done_err[r] <= opts.tol and not self_collision(chain, Q[r]):
            return Q[r]
    return None


def solve_ik(chain: SerialChain, target: Pose, opts: IkOptions = IkOptions()):
    """Damped-least-squares IK with limit clamping and random restarts.

    Returns a joint vector within limits and free of self-collision whose
    FK error norm is at most opts.tol, or None when no restart succeeds
    (a valid "unreachable" answer, not an error).  Deterministic for a
    fixed (target, opts).
    """
    if target.space != chain.space:
        raise ValueError("target space does not match chain task space")
    # cheap reject: position farther than the total link length from base
    base_p = np.array(chain.base_pose.coords[:2 if chain.space.kind in ("R2", "SE2") else 3])
    tgt_p = np.array(target.coords[:len(base_p)])
    if np.linalg.norm(tgt_p - base_p) > _max_reach(chain) + opts.tol:
        return None
    if chain._planar and chain.space.kind in ("R2", "SE2"):
        return _solve_ik_planar(chain, target, opts)

    rng = np.random.default_rng(opts.rng_seed)
    lo, hi = chain.lower, chain.upper
    lam2 = opts.damping ** 2
    for attempt in range(opts.restarts):
        if attempt == 0:
            q = 0.5 * (lo + hi)
        else:
            q = rng.uniform(lo, hi)
        best_err = np.inf
        stall = 0
        for _ in range(opts.max_iters):
            e = _task_error(chain, fk(chain, q), target)
            err = np.linalg.norm(e)
            if err <= opts.tol:
                break
            if err > best_err - 1e-12:
                stall += 1
                if stall >= 8:
                    break
            else:
                stall = 0
            best_err = min(best_err, err)
            J = fk_jacobian(chain, q)
            dq = J.T @ np.linalg.solve(J @ J.T + lam2 * np.eye(J.shape[0]), e)
            q = np.clip(q + dq, lo, hi)
        e = _task_error(chain, fk(chain, q), target)
        if np.linalg.norm(e) <= opts.tol and not self_collision(chain, q):
            return q
    return None


# ---------------------------------------------------------------------------
# Grid reachability oracle


class GridOracle:
    """Dense joint-grid FK sweep used as brute-force reachability ground truth.

    A point is reachable when some grid configuration's end-effector lies
    within half a grid cell's worst-case workspace displacement of it.
    Only meaningful for chains with at most 3 joints.
    """

    def __init__(self, chain: SerialChain, resolution: int = 200):
        if chain.n_joints > 3:
            raise ValueError("grid oracle only supports chains with <= 3 joints")
        self.chain = chain
        self.resolution = resolution
        axes = [np.linspace(j.limits[0], j.limits[1], resolution) for j in chain.joints]
        grids = np.meshgrid(*axes, indexing="ij")
        Q = np.column_stack([g.ravel() for g in grids])
        if chain.capsules:
            Q = np.array([q for q in Q if not self_collision(chain, q)])
        steps = np.array([(j.limits[1] - j.limits[0]) / (resolution - 1)
                          for j in chain.joints])
        # half-cell displacement bound per grid configuration: the workspace
        # motion across one cell is at most sum_j lever_j(q) * step_j, with
        # lever_j the distance from joint j's origin to the end effector
        if chain._planar:
            lengths = np.array([j.offset_xyz[0] for j in chain.joints])
            ang = np.cumsum(Q, axis=1)
            segs = np.stack([np.cos(ang) * lengths, np.sin(ang) * lengths], axis=2)
            pts_rel = segs.sum(axis=1)
            base = np.array(chain.base_pose.coords[:2])
            bt = chain.base_pose.coords[2] if chain.space.kind == "SE2" else 0.0
            cb, sb = np.cos(bt), np.sin(bt)
            pts = base + pts_rel @ np.array([[cb, sb], [-sb, cb]])
            # lever_j = |EE - joint j origin| = |sum of segments from j on|
            tails = np.flip(np.cumsum(np.flip(segs, 1), axis=1), 1)
            levers = np.linalg.norm(tails, axis=2)
            self.tols = 0.5 * (levers * steps).sum(axis=1)
        else:
            pts = np.array([fk(chain, q).coords[:chain.space.pose_dim] for q in Q])
            pts = pts[:, :3] if chain.space.kind == "R3" else pts[:, :2]
            levers = np.array([
                sum(np.linalg.norm(j.offset_xyz) for j in chain.joints[i:])
                for i in range(chain.n_joints)])
            self.tols = np.full(len(pts), 0.5 * float(levers @ steps))
        self.points = pts
        self.tree = cKDTree(pts)
        self.tol = float(np.max(self.tols))

    def query(self, points) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        d, idx = self.tree.query(points)
        return d <= self.tols[idx]


_oracle_cache: dict = {}


def oracle_reachable(chain: SerialChain, point, grid_resolution: int = 200) -> bool:
    """Single-point wrapper around GridOracle (cached per chain/resolution)."""
    key = (id(chain), grid_resolution)
    oracle = _oracle_cache.get(key)
    if oracle is None:
        oracle = GridOracle(chain, grid_resolution)
        _oracle_cache[key] = oracle
    return bool(oracle.query(np.asarray(point, dtype=float))[0])


# ---------------------------------------------------------------------------
# Chain presets and JSON serialization


def arm_2dof() -> SerialChain:
    """Planar 2-DoF evaluation arm: unit links, limits [0, pi/2] x [0, pi]."""
    return planar_chain("arm2", link_lengths=(1.0, 1.0),
                        limits=((0.0, np.pi / 2), (0.0, np.pi)), space=R2)


def leg_chain() -> SerialChain:
    """Planar 3R stand-in for a leg connecting the waist to a foot (SE2)."""
    return planar_chain("leg3", link_lengths=(0.25, 0.25, 0.12),
                        limits=((-3.0, 3.0),) * 3, space=SE2)


def hand_chain() -> SerialChain:
    """Planar 3R stand-in for an arm reaching from a support pose (SE2)."""
    return planar_chain("hand3", link_lengths=(0.4, 0.4, 0.15),
                        limits=((-2.8, 2.8),) * 3, space=SE2)


_PRESETS = {"arm2": arm_2dof, "leg3": leg_chain, "hand3": hand_chain}


def chain_to_dict(chain: SerialChain) -> dict:
    return {
        "name": chain.name,
        "task_space": chain.space.kind,
        "base_pose": list(chain.base_pose.coords),
        "joints": [
            {"axis": list(j.axis), "limits": list(j.limits),
             "offset_xyz": list(j.offset_xyz), "offset_rpy": list(j.offset_rpy)}
            for j in chain.joints
        ],
        "capsules": [
            {"link_a": c.link_a, "link_b": c.link_b,
             "radius_a": c.radius_a, "radius_b": c.radius_b}
            for c in chain.capsules
        ],
    }


def chain_from_dict(d: dict) -> SerialChain:
    space = TaskSpace(d["task_space"])
    joints = tuple(
        Joint(axis=tuple(j["axis"]), limits=tuple(j["limits"]),
              offset_xyz=tuple(j["offset_xyz"]),
              offset_rpy=tuple(j.get("offset_rpy", (0, 0, 0))))
        for j in d["joints"])
    capsules = tuple(
        Capsule(c["link_a"], c["link_b"], c["radius_a"], c["radius_b"])
        for c in d.get("capsules", ()))
    base = Pose(space, tuple(d["base_pose"])) if "base_pose" in d else None
    return SerialChain(name=d.get("name", "chain"), space=space, joints=joints,
                       capsules=capsules, base_pose=base)


def save_chain(chain: SerialChain, path):
    with open(path, "w") as f:
        json.dump(chain_to_dict(chain), f, indent=2, sort_keys=True)
        f.write("\n")


def load_chain(path_or_preset) -> SerialChain:
    """Load a chain from a JSON file, or build one of the named presets."""
    s = str(path_or_preset)
    if s in _PRESETS:
        return _PRESETS[s]()
    with open(s) as f:
        return chain_from_dict(json.load(f))
