import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from reachmap.geometry import (R2, R3, SE2, SE3, InvalidPoseError, Pose,
                               SpaceMismatchError, UnsupportedSpaceError,
                               compose, encode, encode_rel, inverse, jac_rel,
                               wrap_angle)


def se2(x, y, t):
    return Pose(SE2, (x, y, t))


finite = st.floats(-10.0, 10.0, allow_nan=False)
angle = st.floats(-np.pi + 1e-9, np.pi, allow_nan=False)
se2_poses = st.builds(se2, finite, finite, angle)


class TestSpaces:
    def test_dims(self):
        assert (R2.pose_dim, R2.input_dim) == (2, 2)
        assert (SE2.pose_dim, SE2.input_dim) == (3, 4)
        assert (R3.pose_dim, R3.input_dim) == (3, 3)
        assert (SE3.pose_dim, SE3.input_dim) == (6, 12)

    def test_se3_quaternion_must_be_unit(self):
        with pytest.raises(InvalidPoseError):
            Pose(SE3, (0, 0, 0, 0.9, 0, 0, 0.1))


class TestEncode:
    def test_se2_identity(self):
        assert np.allclose(encode(se2(0, 0, 0)), [0, 0, 1, 0])

    def test_se2_quarter_turn(self):
        assert np.allclose(encode(se2(1, 2, np.pi / 2)), [1, 2, 0, 1],
                           atol=1e-12)

    def test_se3_identity(self):
        p = Pose(SE3, (0, 0, 0, 1, 0, 0, 0))
        assert np.allclose(encode(p), [0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1])

    def test_r2_passthrough(self):
        assert np.allclose(encode(Pose(R2, (0.5, -0.25))), [0.5, -0.25])

    @given(se2_poses)
    def test_rotation_entries_unit_norm(self, p):
        x = encode(p)
        assert abs(x[2] ** 2 + x[3] ** 2 - 1.0) <= 1e-12


class TestEncodeRel:
    def test_equal_poses_identity(self):
        p = se2(1, 2, np.pi / 6)
        assert np.allclose(encode_rel(p, p), [0, 0, 1, 0], atol=1e-12)

    def test_identity_base(self):
        out = encode_rel(se2(0, 0, 0), se2(1, 0, np.pi / 2))
        assert np.allclose(out, [1, 0, 0, 1], atol=1e-12)

    def test_rotated_base(self):
        out = encode_rel(se2(1, 0, np.pi / 2), se2(1, 1, np.pi / 2))
        assert np.allclose(out, [1, 0, 1, 0], atol=1e-12)

    def test_r2_difference(self):
        out = encode_rel(Pose(R2, (1, 1)), Pose(R2, (3, 0)))
        assert np.allclose(out, [2, -1])

    def test_space_mismatch(self):
        with pytest.raises(SpaceMismatchError):
            encode_rel(Pose(R2, (0, 0)), se2(0, 0, 0))

    @given(se2_poses)
    def test_self_relative_is_identity(self, p):
        assert np.allclose(encode_rel(p, p), [0, 0, 1, 0], atol=1e-9)

    @given(se2_poses, se2_poses, se2_poses)
    def test_left_invariance(self, g, r0, r1):
        direct = encode_rel(r0, r1)
        moved = encode_rel(compose(g, r0), compose(g, r1))
        assert np.allclose(direct, moved, atol=1e-9)


class TestComposeInverse:
    @given(se2_poses)
    def test_inverse_compose_identity(self, p):
        q = compose(inverse(p), p)
        assert np.allclose(q.coords, [0, 0, 0], atol=1e-9)

    def test_theta_wrapped(self):
        q = compose(se2(0, 0, 3.0), se2(0, 0, 3.0))
        assert -np.pi < q.coords[2] <= np.pi

    def test_wrap_angle_halfopen(self):
        assert wrap_angle(np.pi) == pytest.approx(np.pi)
        assert wrap_angle(-np.pi) == pytest.approx(np.pi)
        assert wrap_angle(2 * np.pi) == pytest.approx(0.0, abs=1e-12)


def fd_jac_rel(r0, r1, h=1e-6):
    """Central-difference Jacobians of encode_rel in the pose coordinates."""
    m = r0.space.pose_dim
    mk = lambda c: Pose(r0.space, tuple(c))
    j0 = np.empty((r0.space.input_dim, m))
    j1 = np.empty_like(j0)
    for k in range(m):
        e = np.zeros(m)
        e[k] = h
        j0[:, k] = (encode_rel(mk(np.add(r0.coords, e)), r1)
                    - encode_rel(mk(np.subtract(r0.coords, e)), r1)) / (2 * h)
        j1[:, k] = (encode_rel(r0, mk(np.add(r1.coords, e)))
                    - encode_rel(r0, mk(np.subtract(r1.coords, e)))) / (2 * h)
    return j0, j1


class TestJacRel:
    def test_r3_constant(self):
        j0, j1 = jac_rel(Pose(R3, (1, 2, 3)), Pose(R3, (0, 0, 1)))
        assert np.allclose(j0, -np.eye(3))
        assert np.allclose(j1, np.eye(3))

    def test_se2_identity_base_fd(self):
        r0, r1 = se2(0, 0, 0), se2(0.5, -0.25, 0.7)
        a0, a1 = jac_rel(r0, r1)
        f0, f1 = fd_jac_rel(r0, r1)
        assert np.allclose(a0, f0, atol=1e-6)
        assert np.allclose(a1, f1, atol=1e-6)

    def test_se2_rotated_base_fd(self):
        r0, r1 = se2(1, 0, np.pi / 2), se2(1, 1, np.pi / 2)
        a0, a1 = jac_rel(r0, r1)
        f0, f1 = fd_jac_rel(r0, r1)
        assert np.allclose(a0, f0, atol=1e-6)
        assert np.allclose(a1, f1, atol=1e-6)

    def test_se3_unsupported(self):
        p = Pose(SE3, (0, 0, 0, 1, 0, 0, 0))
        with pytest.raises(UnsupportedSpaceError):
            jac_rel(p, p)

    def test_fd_agreement_1000_random_pairs(self):
        rng = np.random.default_rng(42)
        worst = 0.0
        for _ in range(1000):
            r0 = se2(*rng.uniform(-2, 2, 2), rng.uniform(-3, 3))
            r1 = se2(*rng.uniform(-2, 2, 2), rng.uniform(-3, 3))
            a0, a1 = jac_rel(r0, r1)
            f0, f1 = fd_jac_rel(r0, r1)
            scale = max(1.0, np.abs(f0).max(), np.abs(f1).max())
            worst = max(worst, np.abs(a0 - f0).max() / scale,
                        np.abs(a1 - f1).max() / scale)
        assert worst < 1e-6
