import numpy as np
import pytest
from hypothesis import given, strategies as st

from motioninv.errors import ValidationError
from motioninv.pose_io import Pose, Trajectory
from motioninv.quaternion import quat_from_axis_angle, quat_rotate, quat_to_rotmat, random_quaternions
from motioninv.screw import (
    GENERAL, IDENTITY, PURE_TRANSLATION, ScrewLine, apply_screw, finite_screw, line_closest_points,
    relative_rotation, trajectory_screws,
)

I = np.array([1.0, 0.0, 0.0, 0.0])
RZ90 = quat_from_axis_angle([0, 0, 1], np.pi / 2)


def test_relative_rotation_quarter_turn():
    dq, axis, theta = relative_rotation(I, RZ90)
    h = np.sqrt(2) / 2
    assert np.allclose(dq, [h, 0, 0, h])
    assert np.allclose(axis, [0, 0, 1])
    assert theta == pytest.approx(np.pi / 2, abs=1e-15)


def test_relative_rotation_identity():
    _, axis, theta = relative_rotation(I, I)
    assert axis is None and theta == 0.0


def test_relative_rotation_half_turn():
    _, axis, theta = relative_rotation(I, quat_from_axis_angle([1, 0, 0], np.pi))
    assert np.allclose(axis, [1, 0, 0])
    assert theta == pytest.approx(np.pi)


def test_screw_quarter_turn_about_origin():
    s = finite_screw(Pose(np.array([1.0, 0, 0]), I), Pose(np.array([0.0, 1, 0]), RZ90, 1))
    assert s.kind == GENERAL
    assert np.allclose(s.direction, [0, 0, 1])
    assert s.angle == pytest.approx(np.pi / 2)
    assert np.allclose(s.point, 0, atol=1e-15)
    assert s.frame_index == 1


def test_screw_pure_translation():
    s = finite_screw(Pose(np.zeros(3), I), Pose(np.array([0, 0, 0.01]), I))
    assert s.kind == PURE_TRANSLATION
    assert np.allclose(s.direction, [0, 0, 1])
    assert np.allclose(s.point, 0)


def test_screw_rotation_in_place():
    p = np.array([2.0, 0, 0])
    s = finite_screw(Pose(p, I), Pose(p, RZ90))
    assert np.allclose(s.point, p)
    assert np.allclose(s.direction, [0, 0, 1])


def test_screw_identity():
    s = finite_screw(Pose(np.ones(3), I), Pose(np.ones(3), I))
    assert s.kind == IDENTITY


def test_screw_near_half_turn_is_finite():
    q1 = quat_from_axis_angle([0, 1, 0], np.pi)
    s = finite_screw(Pose(np.array([1.0, 0, 0]), I), Pose(np.array([-1.0, 0, 0.3]), q1))
    assert np.all(np.isfinite(s.point))
    out = apply_screw(s, Pose(np.array([1.0, 0, 0]), I))
    assert np.allclose(out.position, [-1, 0, 0.3], atol=1e-12)


def test_trajectory_needs_two_poses():
    with pytest.raises(ValidationError, match="need >= 2 poses"):
        trajectory_screws(Trajectory("left", np.zeros((1, 3)), I[None], None))


@given(st.integers(0, 2**32 - 1))
def test_frame_invariance(seed):
    rng = np.random.default_rng(seed)
    q0, q1, g = random_quaternions(rng, 3)
    p0, p1, d = rng.normal(size=(3, 3))
    a = finite_screw(Pose(p0, q0), Pose(p1, q1))
    from motioninv.quaternion import quat_mul

    b = finite_screw(Pose(quat_rotate(g, p0) + d, quat_mul(g, q0)), Pose(quat_rotate(g, p1) + d, quat_mul(g, q1)))
    R = quat_to_rotmat(g)
    assert b.angle == pytest.approx(a.angle, abs=1e-12)
    assert np.max(np.abs(b.direction - R @ a.direction)) < 1e-9
    assert np.max(np.abs(b.point - (R @ a.point + d))) < 1e-9


def _line(p, d):
    return ScrewLine.through(np.asarray(p, float), np.asarray(d, float))


def test_closest_points_parallel():
    seg = line_closest_points(_line([0, 0, 0], [0, 0, 1]), _line([1, 0, 0], [0, 0, 1]))
    assert seg.case == "parallel" and seg.distance == pytest.approx(1.0)
    assert np.allclose(seg.p_a, 0) and np.allclose(seg.p_b, [1, 0, 0])


def test_closest_points_skew():
    seg = line_closest_points(_line([0, 0, 0], [1, 0, 0]), _line([0, 0, 1], [0, 1, 0]))
    assert seg.case == "skew" and seg.distance == pytest.approx(1.0)
    assert np.allclose(seg.p_a, 0) and np.allclose(seg.p_b, [0, 0, 1])


def test_closest_points_intersecting():
    seg = line_closest_points(_line([0, 0, 0], [1, 0, 0]), _line([0, 0, 0], [0, 1, 0]))
    assert seg.case == "intersecting" and seg.distance == 0.0
    assert np.allclose(seg.p_a, 0) and np.allclose(seg.p_b, 0)


def test_antiparallel_takes_parallel_branch():
    seg = line_closest_points(_line([0, 0, 0], [0, 0, 1]), _line([0, 2, 5], [0, 0, -1]))
    assert seg.case == "parallel" and seg.distance == pytest.approx(2.0)


@given(st.integers(0, 2**32 - 1))
def test_closest_points_swap_symmetry(seed):
    rng = np.random.default_rng(seed)
    a = _line(rng.normal(size=3), rng.normal(size=3))
    b = _line(rng.normal(size=3), rng.normal(size=3))
    ab, ba = line_closest_points(a, b), line_closest_points(b, a)
    assert ab.distance == ba.distance
    assert np.array_equal(ab.p_a, ba.p_b) and np.array_equal(ab.p_b, ba.p_a)


@given(st.integers(0, 2**32 - 1))
def test_closest_points_are_on_lines_and_normal(seed):
    rng = np.random.default_rng(seed)
    a = _line(rng.normal(size=3), rng.normal(size=3))
    b = _line(rng.normal(size=3), rng.normal(size=3))
    seg = line_closest_points(a, b)
    u = seg.p_b - seg.p_a
    assert abs(u @ a.direction) < 1e-9 and abs(u @ b.direction) < 1e-9
    assert np.linalg.norm(np.cross(seg.p_a - a.point, a.direction)) < 1e-9
    assert np.linalg.norm(np.cross(seg.p_b - b.point, b.direction)) < 1e-9
