"""Task spaces, pose arithmetic, and differentiable model-input encodings.

Poses live in one of four task spaces (R2, SE2, R3, SE3).  Learned
reachability models never see raw poses; they see encoded input vectors
in which orientations are represented by rotation-matrix entries, so the
encoding is smooth and singularity-free.  For SE2 the two redundant
entries of the 2x2 rotation matrix are dropped: the encoding is
(x, y, cos(theta), sin(theta)).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

QUAT_TOL = 1e-9


class SpaceMismatchError(ValueError):
    """Raised when two poses from different task spaces are combined."""


class InvalidPoseError(ValueError):
    """Raised for malformed pose coordinates (e.g. non-unit quaternion)."""


class UnsupportedSpaceError(ValueError):
    """Raised for operations not defined on a task space (e.g. SE3 Jacobians)."""


# kind -> (stored coordinate length, pose vector dim M_r, model input dim M_x)
_SPACE_DIMS = {
    "R2": (2, 2, 2),
    "SE2": (3, 3, 4),
    "R3": (3, 3, 3),
    "SE3": (7, 6, 12),
}


@dataclass(frozen=True)
class TaskSpace:
    kind: str

    def __post_init__(self):
        if self.kind not in _SPACE_DIMS:
            raise ValueError(f"unknown task space kind: {self.kind!r}")

    @property
    def coord_dim(self) -> int:
        """Length of the stored coordinate vector (7 for SE3: pos + quat)."""
        return _SPACE_DIMS[self.kind][0]

    @property
    def pose_dim(self) -> int:
        """Dimension M_r of the pose vector used by the planner."""
        return _SPACE_DIMS[self.kind][1]

    @property
    def input_dim(self) -> int:
        """Dimension M_x of the encoded model input."""
        return _SPACE_DIMS[self.kind][2]

    @property
    def has_orientation(self) -> bool:
        return self.kind in ("SE2", "SE3")


R2 = TaskSpace("R2")
SE2 = TaskSpace("SE2")
R3 = TaskSpace("R3")
SE3 = TaskSpace("SE3")


def wrap_angle(theta: float) -> float:
    """Normalize an angle to (-pi, pi]."""
    t = theta - 2.0 * np.pi * np.floor((theta + np.pi) / (2.0 * np.pi))
    if t <= -np.pi:
        t = np.pi
    return float(t)


def _quat_normalize_check(q):
    q = np.asarray(q, dtype=float)
    n = np.linalg.norm(q)
    if abs(n - 1.0) > QUAT_TOL:
        raise InvalidPoseError(f"quaternion norm {n} deviates from 1 beyond {QUAT_TOL}")
    return q


def quat_mul(q1, q2):
    w1, x1, y1, z1 = q1
    w2, x2, y2, z2 = q2
    return np.array([
        w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
        w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
        w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
        w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
    ])


def quat_to_matrix(q):
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def matrix_to_quat(R):
    """Rotation matrix -> unit quaternion (w, x, y, z), w >= 0."""
    R = np.asarray(R, dtype=float)
    tr = R[0, 0] + R[1, 1] + R[2, 2]
    if tr > 0:
        s = np.sqrt(tr + 1.0) * 2
        q = np.array([0.25 * s, (R[2, 1] - R[1, 2]) / s,
                      (R[0, 2] - R[2, 0]) / s, (R[1, 0] - R[0, 1]) / s])
    elif R[0, 0] >= R[1, 1] and R[0, 0] >= R[2, 2]:
        s = np.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2]) * 2
        q = np.array([(R[2, 1] - R[1, 2]) / s, 0.25 * s,
                      (R[0, 1] + R[1, 0]) / s, (R[0, 2] + R[2, 0]) / s])
    elif R[1, 1] >= R[2, 2]:
        s = np.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2]) * 2
        q = np.array([(R[0, 2] - R[2, 0]) / s, (R[0, 1] + R[1, 0]) / s,
                      0.25 * s, (R[1, 2] + R[2, 1]) / s])
    else:
        s = np.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1]) * 2
        q = np.array([(R[1, 0] - R[0, 1]) / s, (R[0, 2] + R[2, 0]) / s,
                      (R[1, 2] + R[2, 1]) / s, 0.25 * s])
    if q[0] < 0:
        q = -q
    return q / np.linalg.norm(q)


@dataclass(frozen=True)
class Pose:
    """A pose in a task space.

    Coordinate layout: R2 (x, y); SE2 (x, y, theta); R3 (x, y, z);
    SE3 (x, y, z, qw, qx, qy, qz) with a unit quaternion.
    """

    space: TaskSpace
    coords: tuple

    def __post_init__(self):
        c = tuple(float(v) for v in self.coords)
        if len(c) != self.space.coord_dim:
            raise InvalidPoseError(
                f"{self.space.kind} pose needs {self.space.coord_dim} coords, got {len(c)}")
        if self.space.kind == "SE3":
            _quat_normalize_check(c[3:])
        object.__setattr__(self, "coords", c)

    @property
    def array(self) -> np.ndarray:
        return np.array(self.coords)

    @staticmethod
    def identity(space: TaskSpace) -> "Pose":
        if space.kind == "SE3":
            return Pose(space, (0, 0, 0, 1, 0, 0, 0))
        return Pose(space, (0,) * space.coord_dim)


def compose(p1: Pose, p2: Pose) -> Pose:
    """Group composition p1 * p2 (translation addition for R2/R3)."""
    if p1.space != p2.space:
        raise SpaceMismatchError(f"{p1.space.kind} vs {p2.space.kind}")
    k = p1.space.kind
    if k in ("R2", "R3"):
        return Pose(p1.space, tuple(np.add(p1.coords, p2.coords)))
    if k == "SE2":
        x1, y1, t1 = p1.coords
        x2, y2, t2 = p2.coords
        c, s = np.cos(t1), np.sin(t1)
        return Pose(p1.space, (x1 + c * x2 - s * y2,
                               y1 + s * x2 + c * y2,
                               wrap_angle(t1 + t2)))
    # SE3
    pos1, q1 = np.array(p1.coords[:3]), np.array(p1.coords[3:])
    pos2, q2 = np.array(p2.coords[:3]), np.array(p2.coords[3:])
    q = quat_mul(q1, q2)
    q = q / np.linalg.norm(q)
    pos = pos1 + quat_to_matrix(q1) @ pos2
    return Pose(p1.space, tuple(np.concatenate([pos, q])))


def inverse(p: Pose) -> Pose:
    k = p.space.kind
    if k in ("R2", "R3"):
        return Pose(p.space, tuple(-np.asarray(p.coords)))
    if k == "SE2":
        x, y, t = p.coords
        c, s = np.cos(t), np.sin(t)
        return Pose(p.space, (-(c * x + s * y), -(-s * x + c * y), wrap_angle(-t)))
    pos, q = np.array(p.coords[:3]), np.array(p.coords[3:])
    qinv = np.array([q[0], -q[1], -q[2], -q[3]])
    return Pose(p.space, tuple(np.concatenate([-quat_to_matrix(qinv) @ pos, qinv])))


def encode(p: Pose) -> np.ndarray:
    """Model-input encoding of a pose (length M_x).

    R2/R3 pass coordinates through.  SE2 maps to (x, y, cos t, sin t),
    the two unique entries of the planar rotation matrix.  SE3 maps to
    position followed by the row-major 3x3 rotation matrix.
    """
    k = p.space.kind
    if k in ("R2", "R3"):
        return p.array
    if k == "SE2":
        x, y, t = p.coords
        return np.array([x, y, np.cos(t), np.sin(t)])
    pos, q = p.coords[:3], _quat_normalize_check(p.coords[3:])
    return np.concatenate([pos, quat_to_matrix(q).ravel()])


def encode_rel(r0: Pose, r1: Pose) -> np.ndarray:
    """Encoding of the pose of r1 relative to r0.

    Position-only spaces use the plain difference r1 - r0; SE2/SE3
    encode the relative transform inverse(r0) * r1.
    """
    if r0.space != r1.space:
        raise SpaceMismatchError(f"{r0.space.kind} vs {r1.space.kind}")
    if r0.space.kind in ("R2", "R3"):
        return r1.array - r0.array
    return encode(compose(inverse(r0), r1))


def jac_encode(p: Pose) -> np.ndarray:
    """Jacobian of encode(p) w.r.t. the pose vector (M_x x M_r)."""
    k = p.space.kind
    if k in ("R2", "R3"):
        return np.eye(p.space.pose_dim)
    if k == "SE2":
        t = p.coords[2]
        return np.array([
            [1, 0, 0],
            [0, 1, 0],
            [0, 0, -np.sin(t)],
            [0, 0, np.cos(t)],
        ])
    raise UnsupportedSpaceError("SE3 encode Jacobian is not supported")


def jac_rel(r0: Pose, r1: Pose):
    """Analytic Jacobians (d x_rel / d r0, d x_rel / d r1), each M_x x M_r.

    Defined for R2, R3, and SE2; SE3 planning is unsupported.
    """
    if r0.space != r1.space:
        raise SpaceMismatchError(f"{r0.space.kind} vs {r1.space.kind}")
    k = r0.space.kind
    if k in ("R2", "R3"):
        n = r0.space.pose_dim
        return -np.eye(n), np.eye(n)
    if k != "SE2":
        raise UnsupportedSpaceError("jac_rel is not defined for SE3")
    x0, y0, t0 = r0.coords
    x1, y1, t1 = r1.coords
    c0, s0 = np.cos(t0), np.sin(t0)
    dx, dy = x1 - x0, y1 - y0
    rel_x = c0 * dx + s0 * dy
    rel_y = -s0 * dx + c0 * dy
    ct, st = np.cos(t1 - t0), np.sin(t1 - t0)
    j0 = np.array([
        [-c0, -s0, rel_y],
        [s0, -c0, -rel_x],
        [0, 0, st],
        [0, 0, -ct],
    ])
    j1 = np.array([
        [c0, s0, 0],
        [-s0, c0, 0],
        [0, 0, -st],
        [0, 0, ct],
    ])
    return j0, j1


def pose_from_vector(space: TaskSpace, v) -> Pose:
    """Build a pose from a planner-style pose vector (theta wrapped for SE2)."""
    v = np.asarray(v, dtype=float)
    if space.kind == "SE2":
        return Pose(space, (v[0], v[1], wrap_angle(v[2])))
    if space.kind == "SE3":
        raise UnsupportedSpaceError("SE3 pose vectors are not supported")
    return Pose(space, tuple(v))
