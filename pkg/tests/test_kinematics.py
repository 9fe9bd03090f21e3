"""Rotation representation and forward-kinematics tests."""

import numpy as np
import pytest

from comotion.graph import backward, gradient_check, record
from comotion.kinematics import (
    DEFAULT_HUMAN_SKELETON,
    STATE_DIM,
    KinematicsError,
    Skeleton,
    axis_angle_matrix,
    fk_graph,
    forward_kinematics,
    identity_state,
    joint_rotation,
    load_skeleton,
    matrix_to_rot6d,
    quat_from_matrix,
    quat_to_matrix,
    relative_angle,
    rot6d_to_matrix,
    rot6d_to_mat_t_graph,
    save_skeleton,
    yaw_matrix,
)


def random_rotation(rng) -> np.ndarray:
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    return axis_angle_matrix(axis, rng.uniform(-np.pi, np.pi))


def test_rot6d_identity():
    R = rot6d_to_matrix([1, 0, 0, 0, 1, 0])
    assert np.allclose(R, np.eye(3), atol=1e-15)


def test_rot6d_quarter_turn_about_z():
    R = rot6d_to_matrix([0, 1, 0, -1, 0, 0])
    assert np.allclose(R, yaw_matrix(np.pi / 2), atol=1e-15)
    assert np.allclose(matrix_to_rot6d(yaw_matrix(np.pi / 2)), [0, 1, 0, -1, 0, 0], atol=1e-15)


def test_rot6d_round_trip_1000_rotations():
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(1000):
        R = random_rotation(rng)
        back = rot6d_to_matrix(matrix_to_rot6d(R))
        worst = max(worst, float(np.abs(back - R).max()))
    assert worst < 1e-9


def test_rot6d_output_is_orthonormal_for_noisy_input():
    rng = np.random.default_rng(1)
    for _ in range(100):
        r = rng.normal(size=6)
        R = rot6d_to_matrix(r)
        assert np.allclose(R.T @ R, np.eye(3), atol=1e-9)
        assert np.linalg.det(R) == pytest.approx(1.0, abs=1e-9)


def test_rot6d_degenerate_columns_rejected():
    with pytest.raises(KinematicsError, match="degenerate"):
        rot6d_to_matrix([1, 0, 0, 2, 0, 0])
    with pytest.raises(KinematicsError, match="degenerate"):
        rot6d_to_matrix([0, 0, 0, 0, 1, 0])


def test_matrix_to_rot6d_rejects_non_orthonormal():
    with pytest.raises(KinematicsError):
        matrix_to_rot6d(np.eye(3) * 1.5)


def test_quaternion_round_trip():
    rng = np.random.default_rng(2)
    for _ in range(200):
        R = random_rotation(rng)
        assert np.allclose(quat_to_matrix(quat_from_matrix(R)), R, atol=1e-12)


def test_relative_angle_basics():
    rng = np.random.default_rng(3)
    q = quat_from_matrix(random_rotation(rng))
    assert relative_angle(q, q) == 0.0
    assert relative_angle(q, -q) == 0.0  # double cover
    qz = quat_from_matrix(yaw_matrix(np.pi / 2))
    qi = np.array([1.0, 0.0, 0.0, 0.0])
    assert relative_angle(qz, qi) == pytest.approx(np.pi / 2, abs=1e-12)


def test_relative_angle_symmetry():
    rng = np.random.default_rng(4)
    for _ in range(50):
        qa = quat_from_matrix(random_rotation(rng))
        qb = quat_from_matrix(random_rotation(rng))
        assert relative_angle(qa, qb) == pytest.approx(relative_angle(qb, qa), abs=1e-14)


def random_state(rng) -> np.ndarray:
    state = np.empty(STATE_DIM)
    state[:3] = rng.uniform(-2, 2, size=3)
    for j in range(21):
        state[3 + 6 * j : 9 + 6 * j] = matrix_to_rot6d(random_rotation(rng))
    return state


def fk_oracle(skeleton, state, link):
    """Independent FK using homogeneous 4x4 stacks."""
    chain = skeleton.chain(link)
    T = np.eye(4)
    T[:3, 3] = state[:3]
    T[:3, :3] = rot6d_to_matrix(state[3:9])
    for idx in chain[1:]:
        L = np.eye(4)
        L[:3, 3] = skeleton.joints[idx].offset
        L[:3, :3] = rot6d_to_matrix(joint_rotation(state, idx))
        T = T @ L
    return T[:3, 3], T[:3, :3]


def test_fk_identity_pose_sums_offsets():
    sk = DEFAULT_HUMAN_SKELETON
    state = identity_state(base_pos=(1.0, 2.0, 0.9))
    pos, R = forward_kinematics(sk, state, "rWrist")
    expected = np.array([1.0, 2.0, 0.9])
    for idx in sk.chain("rWrist")[1:]:
        expected = expected + np.asarray(sk.joints[idx].offset)
    assert np.allclose(pos, expected, atol=1e-15)
    assert np.allclose(R, np.eye(3), atol=1e-15)


def test_fk_rotated_base_moves_child():
    sk = Skeleton(
        (
            type(DEFAULT_HUMAN_SKELETON.joints[0])("base", -1, (0.0, 0.0, 0.0)),
            type(DEFAULT_HUMAN_SKELETON.joints[0])("tip", 0, (1.0, 0.0, 0.0)),
        )
    )
    state = np.zeros(STATE_DIM)
    state[:3] = [0.5, 0.5, 0.0]
    state[3:9] = matrix_to_rot6d(yaw_matrix(np.pi / 2))
    for j in range(1, 21):
        state[3 + 6 * j : 9 + 6 * j] = [1, 0, 0, 0, 1, 0]
    pos, _ = forward_kinematics(sk, state, "tip")
    assert np.allclose(pos, [0.5, 1.5, 0.0], atol=1e-15)


def test_fk_matches_homogeneous_oracle():
    rng = np.random.default_rng(5)
    sk = DEFAULT_HUMAN_SKELETON
    for _ in range(25):
        state = random_state(rng)
        link = sk.names[rng.integers(0, 21)]
        pos, R = forward_kinematics(sk, state, link)
        pos_ref, R_ref = fk_oracle(sk, state, link)
        assert np.allclose(pos, pos_ref, atol=1e-9)
        assert np.allclose(R, R_ref, atol=1e-9)


def test_fk_unknown_link():
    with pytest.raises(KinematicsError, match="unknown link"):
        forward_kinematics(DEFAULT_HUMAN_SKELETON, identity_state(), "tail")


def test_fk_graph_matches_numpy():
    rng = np.random.default_rng(6)
    sk = DEFAULT_HUMAN_SKELETON
    for link in ["rWrist", "head", "lToe", "base"]:
        state = random_state(rng)

        def f(t, r):
            pos, _ = fk_graph(t, sk, r["state"], link)
            return pos

        _, out = record(f, {"state": state})
        pos_ref, _ = forward_kinematics(sk, state, link)
        assert np.allclose(out.data, pos_ref, atol=1e-12)


def test_fk_graph_orientation_is_transpose():
    rng = np.random.default_rng(7)
    state = random_state(rng)

    def f(t, r):
        _, mat_t = fk_graph(t, DEFAULT_HUMAN_SKELETON, r["state"], "rWrist")
        return mat_t

    _, out = record(f, {"state": state})
    _, R = forward_kinematics(DEFAULT_HUMAN_SKELETON, state, "rWrist")
    assert np.allclose(out.data, R.T, atol=1e-12)


def test_fk_gradient_matches_finite_differences():
    rng = np.random.default_rng(8)
    sk = DEFAULT_HUMAN_SKELETON
    for trial in range(5):
        state = random_state(rng)
        direction = rng.normal(size=3)

        def f(t, r):
            pos, _ = fk_graph(t, sk, r["state"], "rWrist")
            return t.dot(pos, t.const(direction))

        err = gradient_check(f, {"state": state}, step=1e-6)
        assert err < 1e-5


def test_rot6d_graph_matches_numpy_path():
    rng = np.random.default_rng(9)
    for _ in range(20):
        r6 = rng.normal(size=6)

        def f(t, refs):
            return rot6d_to_mat_t_graph(t, refs["r"])

        _, out = record(f, {"r": r6})
        assert np.allclose(out.data, rot6d_to_matrix(r6).T, atol=1e-9)


def test_skeleton_file_round_trip(tmp_path):
    path = tmp_path / "human.json"
    save_skeleton(DEFAULT_HUMAN_SKELETON, path)
    loaded = load_skeleton(path)
    assert loaded == DEFAULT_HUMAN_SKELETON


def test_skeleton_scaling():
    scaled = DEFAULT_HUMAN_SKELETON.scaled(1.1)
    pos, _ = forward_kinematics(scaled, identity_state(), "head")
    ref, _ = forward_kinematics(DEFAULT_HUMAN_SKELETON, identity_state(), "head")
    assert np.allclose(pos, 1.1 * ref, atol=1e-12)


def test_skeleton_rejects_bad_topology():
    J = type(DEFAULT_HUMAN_SKELETON.joints[0])
    with pytest.raises(KinematicsError):
        Skeleton((J("base", -1, (0, 0, 0)), J("x", 5, (0, 0, 0))))
