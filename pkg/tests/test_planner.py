import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from modsynth.geometry import ConvexMesh, Scene, is_collision_free
from modsynth.kinematics import DHTable, Pose, end_transform
from modsynth.planner import (
    IKFailure,
    JointLimits,
    JointPath,
    NoPathError,
    ik_damped_least_squares,
    path_is_collision_free,
    plan_joint_path,
)

PLANAR2 = DHTable([1.0, 1.0], [0.0, 0.0], [0.0, 0.0], [[0.0], [0.0]])
ARM1 = DHTable([0.5], [0.0], [0.0], [[0.0]])
WALL = Scene((ConvexMesh.box((0.0, 0.4, 0.0), 0.1),))


def _check_path(path, table, scene, start, goal, step):
    np.testing.assert_array_equal(path.start, start)
    np.testing.assert_array_equal(path.goal, goal)
    assert np.abs(path.steps()).max() <= step + 1e-12
    assert path_is_collision_free(table, scene, path)


# -- limits and paths ---------------------------------------------------------


def test_limits_validation():
    with pytest.raises(ValueError):
        JointLimits([0.0], [0.0])
    with pytest.raises(ValueError):
        JointLimits([0.0, 0.0], [1.0])


def test_continuous_diff_goes_short_way():
    lim = JointLimits.unlimited(1)
    assert lim.diff([3.0], [-3.0])[0] == pytest.approx(2 * math.pi - 6.0)
    assert JointLimits.uniform(1).diff([3.0], [-3.0])[0] == -6.0


def test_interpolate_endpoints_exact():
    lim = JointLimits.uniform(2)
    pts = lim.interpolate(np.array([0.1, 0.2]), np.array([0.3, -0.4]), 0.05)
    assert pts[0].tolist() == [0.1, 0.2] and pts[-1].tolist() == [0.3, -0.4]
    assert np.abs(np.diff(pts, axis=0)).max() <= 0.05 + 1e-12


def test_path_round_trip():
    p = JointPath(np.array([[0.0, 1.0], [0.1, 1.05]]), 0.05, [True, False])
    q = JointPath.from_dict(p.to_dict())
    np.testing.assert_array_equal(p.waypoints, q.waypoints)
    assert q.continuous.tolist() == [True, False]
    with pytest.raises(ValueError):
        JointPath(np.zeros((1, 2)), 0.05)


# -- inverse kinematics -------------------------------------------------------


def test_ik_fixed_point():
    q0 = np.array([0.3, -0.7])
    target = Pose(end_transform(PLANAR2, q0)[:3, 3])
    np.testing.assert_array_equal(ik_damped_least_squares(PLANAR2, target, q0, JointLimits.uniform(2)), q0)


def test_ik_planar_two_link():
    q = ik_damped_least_squares(PLANAR2, Pose((1.0, 1.0, 0.0)), [0.3, 0.3], JointLimits.uniform(2))
    assert np.linalg.norm(end_transform(PLANAR2, q)[:3, 3] - [1, 1, 0]) <= 1e-6
    # analytic oracle: elbow angle is +-pi/2 and the shoulder 0 or pi/2
    assert abs(q[1]) == pytest.approx(math.pi / 2, abs=1e-5)
    assert min(abs(q[0]), abs(q[0] - math.pi / 2)) < 1e-5


def test_ik_unreachable():
    with pytest.raises(IKFailure):
        ik_damped_least_squares(PLANAR2, Pose((3.0, 0.0, 0.0)), [0.1, 0.1], JointLimits.uniform(2), max_iterations=100)


def test_ik_bad_seed():
    with pytest.raises(ValueError):
        ik_damped_least_squares(PLANAR2, Pose((1.0, 1.0, 0.0)), [5.0, 0.0], JointLimits.uniform(2))


def test_ik_with_orientation():
    table = DHTable([0.3, 0.3, 0.2], [0.5, -0.4, 0.0], [0.1, 0.0, 0.0], np.zeros((3, 1)))
    q_true = np.array([0.4, -0.6, 0.8])
    T = end_transform(table, q_true)
    from modsynth.kinematics import pose_from_transform

    target = pose_from_transform(T)
    target = Pose(target.position, target.orientation, (1, 0, 0))
    q = ik_damped_least_squares(table, target, [0.3, -0.5, 0.7], JointLimits.uniform(3))
    got = pose_from_transform(end_transform(table, q))
    np.testing.assert_allclose(got.position, T[:3, 3], atol=1e-6)
    assert got.orientation[0] == pytest.approx(target.orientation[0], abs=1e-6)


@given(st.integers(0, 2**32 - 1))
def test_ik_solutions_respect_limits(seed):
    rng = np.random.default_rng(seed)
    lim = JointLimits.uniform(3, -2.0, 2.0)
    table = DHTable(rng.uniform(0.1, 0.4, 3), rng.uniform(-1.5, 1.5, 3), rng.uniform(0, 0.3, 3), np.zeros((3, 1)))
    target = Pose(end_transform(table, lim.sample(rng))[:3, 3])
    try:
        q = ik_damped_least_squares(table, target, lim.sample(rng), lim, max_iterations=100)
    except IKFailure:
        return
    assert lim.contains(q)
    assert np.linalg.norm(end_transform(table, q)[:3, 3] - target.position) <= 1e-6


# -- planning -----------------------------------------------------------------


def test_empty_scene_straight_line():
    start, goal = np.array([0.0, 0.0]), np.array([1.0, -0.5])
    path = plan_joint_path(PLANAR2, Scene(), start, goal, JointLimits.uniform(2))
    np.testing.assert_allclose(path.waypoints, JointLimits.uniform(2).interpolate(start, goal, 0.05))


def test_blocked_goal_reports_no_path():
    # bounded single joint: the wall at +pi/2 cuts 0 off from pi - 0.1
    with pytest.raises(NoPathError):
        plan_joint_path(ARM1, WALL, [0.0], [math.pi - 0.1], JointLimits.uniform(1), max_samples=300)


def test_continuous_joint_goes_around():
    path = plan_joint_path(ARM1, WALL, np.array([0.0]), np.array([math.pi - 0.1]), JointLimits.unlimited(1))
    _check_path(path, ARM1, WALL, [0.0], [math.pi - 0.1], 0.05)
    assert path.waypoints.min() < -math.pi / 2  # went the long way, through -pi


def test_endpoint_validation():
    lim = JointLimits.uniform(1)
    with pytest.raises(ValueError):
        plan_joint_path(ARM1, WALL, [math.pi / 2], [0.0], lim)
    with pytest.raises(ValueError):
        plan_joint_path(ARM1, WALL, [0.0, 0.0], [0.0], lim)
    with pytest.raises(ValueError):
        plan_joint_path(ARM1, WALL, [0.0], [4.0], lim)


def test_table2_location_two_to_three(table2, sec5_scenario):
    scene = sec5_scenario.scene
    start, goal = table2.theta[:, 1], table2.theta[:, 2]
    if not (is_collision_free(table2, scene, start) and is_collision_free(table2, scene, goal)):
        pytest.skip("Table 2 configurations collide with the reconstructed obstacles")
    path = plan_joint_path(table2, scene, start, goal, JointLimits.unlimited(3), seed=0)
    _check_path(path, table2, scene, start, goal, 0.05)


def test_validator_detects_tunnelling():
    # a coarse path straight through the wall must be rejected at fine resolution
    bad = JointPath(np.array([[0.0], [math.pi - 0.1]]), 0.05)
    assert not path_is_collision_free(ARM1, WALL, bad)


@st.composite
def planning_cases(draw):
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 4))
    table = DHTable(rng.uniform(0.1, 0.3, n), rng.uniform(-1.5, 1.5, n), rng.uniform(0, 0.2, n), np.zeros((n, 1)))
    scene = Scene(tuple(ConvexMesh.box(rng.uniform(-0.4, 0.4, 3), rng.uniform(0.05, 0.15))
                        for _ in range(int(rng.integers(1, 3)))))
    limits = JointLimits.unlimited(n) if rng.random() < 0.5 else JointLimits.uniform(n)
    free = [q for q in (limits.sample(rng) for _ in range(20)) if is_collision_free(table, scene, q)]
    assume(len(free) >= 2)
    return table, scene, limits, free[0], free[1], draw(st.integers(0, 1000))


@pytest.mark.property_suite
@given(planning_cases())
def test_planned_paths_collision_free_and_deterministic(case):
    table, scene, limits, start, goal, seed = case
    kwargs = dict(seed=seed, max_samples=500, shortcut_attempts=20)
    try:
        path = plan_joint_path(table, scene, start, goal, limits, **kwargs)
    except NoPathError:
        with pytest.raises(NoPathError):
            plan_joint_path(table, scene, start, goal, limits, **kwargs)
        return
    _check_path(path, table, scene, start, goal, 0.05)
    again = plan_joint_path(table, scene, start, goal, limits, **kwargs)
    np.testing.assert_array_equal(path.waypoints, again.waypoints)
