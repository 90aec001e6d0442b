import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from modsynth.kinematics import (
    DHRow,
    DHTable,
    Pose,
    TaskSpec,
    chain_transforms,
    dh_matrix,
    dh_transform,
    end_transform,
    euler_zyx_to_rotation,
    forward_kinematics,
    pose_error,
    rotation_to_euler_zyx,
    wrap_angle,
)

from .oracles import dh_matrix_by_hand

angle = st.floats(-math.pi, math.pi, allow_nan=False)
length = st.floats(0.0, 1.0, allow_nan=False)


@st.composite
def tables(draw, min_n=1, max_n=6):
    n = draw(st.integers(min_n, max_n))
    vec = lambda elems: draw(arrays(float, n, elements=elems))  # noqa: E731
    return DHTable(vec(length), vec(angle), vec(length), vec(angle).reshape(n, 1))


# -- examples -----------------------------------------------------------------


def test_identity_row():
    np.testing.assert_allclose(dh_matrix(0, 0, 0, 0), np.eye(4), atol=1e-15)


def test_pure_extension():
    T = dh_matrix(1.0, 0, 0, 0)
    np.testing.assert_allclose(T[:3, 3], [1, 0, 0])
    np.testing.assert_allclose(T[:3, :3], np.eye(3), atol=1e-15)


def test_twist_with_offset_matches_hand_product():
    T = dh_matrix(0.0, math.pi / 2, 0.25, 0.0)
    np.testing.assert_allclose(T, dh_matrix_by_hand(0.0, math.pi / 2, 0.25, 0.0), atol=1e-15)
    np.testing.assert_allclose(T[:3, 3], [0, 0, 0.25], atol=1e-15)
    # y axis of the child frame maps onto base z
    np.testing.assert_allclose(T[:3, :3] @ [0, 1, 0], [0, 0, 1], atol=1e-15)


def test_single_row_quarter_turn():
    table = DHTable([1.0], [0.0], [0.0], [[math.pi / 2]])
    np.testing.assert_allclose(forward_kinematics(table, 0).position, [0, 1, 0], atol=1e-15)


def test_two_row_chain():
    table = DHTable([1.0, 1.0], [0, 0], [0, 0], [[0.0], [0.0]])
    np.testing.assert_allclose(forward_kinematics(table, 0).position, [2, 0, 0])


def test_table2_first_location_near_tsl(table2):
    p = forward_kinematics(table2, 0).position
    assert np.linalg.norm(p - [0.3, 0.0, 0.5]) < 1e-2


def test_pose_error_exact_match_is_zero():
    task = TaskSpec.from_positions([(0.1, 0.2, 0.3), (0, 0, 1)])
    assert pose_error(list(task), task) == 0.0


def test_pose_error_euclidean():
    task = TaskSpec.from_positions([(0.0, 0.0, 0.0)])
    actual = [Pose((0.3, 0.4, 0.0))]
    assert pose_error(actual, task) == pytest.approx(0.5, abs=1e-15)


def test_pose_error_wraps_yaw():
    desired = TaskSpec((Pose((0, 0, 0), (3.0, 0, 0), (1, 0, 0)),))
    actual = [Pose((0, 0, 0), (-3.0, 0, 0))]
    assert pose_error(actual, desired) == pytest.approx(2 * math.pi - 6.0, abs=1e-12)


def test_pose_error_length_mismatch():
    with pytest.raises(ValueError):
        pose_error([], TaskSpec.from_positions([(0, 0, 0)]))


def test_forward_kinematics_index_checked(table2):
    with pytest.raises(IndexError):
        forward_kinematics(table2, 3)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(a=[], alpha=[], d=[], theta=[]),
        dict(a=[1, 2], alpha=[0], d=[0, 0], theta=[[0], [0]]),
        dict(a=[1], alpha=[0], d=[0], theta=[[0, 0], [0, 0]]),
        dict(a=[np.nan], alpha=[0], d=[0], theta=[[0]]),
    ],
)
def test_table_validation(kwargs):
    with pytest.raises(ValueError):
        DHTable(**kwargs)


def test_table_is_read_only(table2):
    with pytest.raises(ValueError):
        table2.a[0] = 1.0


def test_wrap_angle_range():
    assert wrap_angle(math.pi) == pytest.approx(math.pi)
    assert wrap_angle(-math.pi) == pytest.approx(math.pi)
    assert wrap_angle(3 * math.pi / 2) == pytest.approx(-math.pi / 2)


def test_dh_transform_matches_matrix():
    row = DHRow(0.2, 0.3, 0.4)
    np.testing.assert_array_equal(dh_transform(row, 0.5), dh_matrix(0.2, 0.3, 0.4, 0.5))


# -- properties ---------------------------------------------------------------


@pytest.mark.property_suite
@given(tables(max_n=4), tables(max_n=4))
def test_fk_composition(t1, t2):
    joined = DHTable(
        np.concatenate([t1.a, t2.a]),
        np.concatenate([t1.alpha, t2.alpha]),
        np.concatenate([t1.d, t2.d]),
        np.concatenate([t1.theta, t2.theta]),
    )
    T = end_transform(t1, t1.theta[:, 0]) @ end_transform(t2, t2.theta[:, 0])
    np.testing.assert_allclose(end_transform(joined, joined.theta[:, 0]), T, atol=1e-10)


@pytest.mark.property_suite
@given(tables(max_n=8))
def test_rotations_stay_orthonormal(table):
    for T in chain_transforms(table, table.theta[:, 0]):
        R = T[:3, :3]
        assert np.linalg.norm(R.T @ R - np.eye(3)) < 1e-9
        assert np.linalg.det(R) == pytest.approx(1.0, abs=1e-9)


@given(length, angle, length, angle)
def test_closed_form_matches_elementary_product(a, alpha, d, theta):
    np.testing.assert_allclose(dh_matrix(a, alpha, d, theta), dh_matrix_by_hand(a, alpha, d, theta), atol=1e-12)


poses = st.builds(
    Pose,
    arrays(float, 3, elements=st.floats(-2, 2)),
    arrays(float, 3, elements=angle),
    arrays(float, 3, elements=st.sampled_from([0.0, 1.0])),
)


@pytest.mark.property_suite
@given(st.lists(st.tuples(poses, poses), min_size=1, max_size=5), st.randoms(use_true_random=False))
def test_pose_error_permutation_invariant(pairs, rnd):
    actual = [p for p, _ in pairs]
    desired = [q for _, q in pairs]
    order = list(range(len(pairs)))
    rnd.shuffle(order)
    e1 = pose_error(actual, TaskSpec(tuple(desired)))
    e2 = pose_error([actual[i] for i in order], TaskSpec(tuple(desired[i] for i in order)))
    assert e1 == pytest.approx(e2, rel=1e-12, abs=1e-15)


@pytest.mark.property_suite
@given(st.lists(poses, min_size=1, max_size=5), st.lists(poses, min_size=5, max_size=5))
def test_pose_error_identity_and_nonnegative(desired, actual):
    task = TaskSpec(tuple(desired))
    assert pose_error(desired, task) == 0.0
    assert pose_error(actual[: len(desired)], task) >= 0.0


@pytest.mark.property_suite
@given(angle, angle)
def test_yaw_error_is_wrapped(yaw_d, yaw_a):
    desired = TaskSpec((Pose((0, 0, 0), (yaw_d, 0, 0), (1, 0, 0)),))
    e = pose_error([Pose((0, 0, 0), (yaw_a, 0, 0))], desired)
    assert e <= math.pi + 1e-12
    assert e == pytest.approx(abs(wrap_angle(yaw_d - yaw_a)), abs=1e-12)


@given(angle, st.floats(-1.5, 1.5), angle)
def test_euler_round_trip(rz, ry, rx):
    R = euler_zyx_to_rotation((rz, ry, rx))
    np.testing.assert_allclose(euler_zyx_to_rotation(rotation_to_euler_zyx(R)), R, atol=1e-10)
