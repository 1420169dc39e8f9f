import numpy as np
import pytest

from morphreduce.errors import DomainError
from morphreduce.rigidbody import (BodyProperties, RigidBodyState, constant_forces,
                                   no_forces, quat_derivative, quat_norm,
                                   quat_normalize, quat_product, quat_to_rotation,
                                   save_trajectory_csv, simulate, step)

EX = np.array([1.0, 0.0, 0.0])
EY = np.array([0.0, 1.0, 0.0])
EZ = np.array([0.0, 0.0, 1.0])
IDENTITY_Q = np.array([1.0, 0.0, 0.0, 0.0])


def random_unit_quaternion(rng):
    q = rng.standard_normal(4)
    return q / np.linalg.norm(q)


def rotate_by_conjugation(q, x):
    """Oracle: rotate x through q [0, x] q^-1 using only the product formula."""
    q_inv = np.array([q[0], -q[1], -q[2], -q[3]]) / (quat_norm(q) ** 2)
    return quat_product(quat_product(q, np.concatenate(([0.0], x))), q_inv)[1:]


class TestQuaternionAlgebra:
    def test_identity_element(self):
        rng = np.random.default_rng(0)
        for _ in range(5):
            q = rng.standard_normal(4)
            np.testing.assert_allclose(quat_product(q, IDENTITY_Q), q, atol=1e-15)
            np.testing.assert_allclose(quat_product(IDENTITY_Q, q), q, atol=1e-15)

    def test_ex_times_ey_is_ez(self):
        got = quat_product(np.concatenate(([0.0], EX)), np.concatenate(([0.0], EY)))
        np.testing.assert_array_equal(got, np.concatenate(([0.0], EZ)))

    def test_norm_multiplicative(self):
        rng = np.random.default_rng(1)
        for _ in range(30):
            q1, q2 = rng.standard_normal(4), rng.standard_normal(4)
            lhs = quat_norm(quat_product(q1, q2))
            rhs = quat_norm(q1) * quat_norm(q2)
            assert abs(lhs - rhs) < 1e-12 * max(rhs, 1.0)

    def test_normalize_zero_rejected(self):
        with pytest.raises(DomainError):
            quat_normalize(np.zeros(4))


class TestRotationMatrix:
    def test_identity_quaternion(self):
        np.testing.assert_array_equal(quat_to_rotation(IDENTITY_Q), np.eye(3))

    def test_ninety_degrees_about_z(self):
        q = np.array([np.cos(np.pi / 4), 0.0, 0.0, np.sin(np.pi / 4)])
        np.testing.assert_allclose(quat_to_rotation(q) @ EX, EY, atol=1e-12)

    def test_matches_conjugation_oracle(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            q = random_unit_quaternion(rng)
            x = rng.standard_normal(3)
            np.testing.assert_allclose(quat_to_rotation(q) @ x,
                                       rotate_by_conjugation(q, x), atol=1e-12)

    def test_orthogonal_with_unit_determinant(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            r = quat_to_rotation(random_unit_quaternion(rng))
            assert np.abs(r.T @ r - np.eye(3)).max() < 1e-10
            assert abs(np.linalg.det(r) - 1.0) < 1e-10

    def test_homomorphism(self):
        rng = np.random.default_rng(4)
        for _ in range(100):
            q1 = random_unit_quaternion(rng)
            q2 = random_unit_quaternion(rng)
            lhs = quat_to_rotation(quat_normalize(quat_product(q1, q2)))
            rhs = quat_to_rotation(q1) @ quat_to_rotation(q2)
            assert np.abs(lhs - rhs).max() < 1e-10

    def test_non_unit_rejected(self):
        with pytest.raises(DomainError):
            quat_to_rotation([1.0, 0.1, 0.0, 0.0])


class TestQuaternionKinematics:
    def test_zero_rate_for_zero_omega(self):
        np.testing.assert_array_equal(quat_derivative(IDENTITY_Q, np.zeros(3)),
                                      np.zeros(4))

    def test_identity_attitude_rate(self):
        got = quat_derivative(IDENTITY_Q, np.array([0.0, 0.0, 2.0]))
        np.testing.assert_array_equal(got, np.array([0.0, 0.0, 0.0, 1.0]))

    def test_norm_preserving_flow(self):
        # d/dt ||q||^2 = 2 <q, qdot> = 0 for the continuous dynamics
        rng = np.random.default_rng(5)
        for _ in range(10):
            q = random_unit_quaternion(rng)
            omega = rng.standard_normal(3)
            assert abs(q @ quat_derivative(q, omega)) < 1e-14


class TestValidation:
    def test_inertia_must_be_symmetric(self):
        bad = np.array([[1.0, 0.2, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
        with pytest.raises(DomainError, match="symmetric"):
            BodyProperties(mass=1.0, inertia=bad)

    def test_inertia_must_be_positive_definite(self):
        with pytest.raises(DomainError, match="positive definite"):
            BodyProperties(mass=1.0, inertia=np.diag([1.0, 1.0, -0.1]))

    def test_mass_positive(self):
        with pytest.raises(DomainError):
            BodyProperties(mass=0.0, inertia=np.eye(3))

    def test_state_quaternion_must_be_unit(self):
        with pytest.raises(DomainError):
            RigidBodyState([0, 0, 0], [0, 0, 0], [0, 0, 0], [1.0, 0.2, 0.0, 0.0])


class TestStep:
    def free_props(self, inertia=None):
        return BodyProperties(mass=2.0, inertia=np.eye(3) if inertia is None else inertia,
                              gravity=[0.0, 0.0, 0.0])

    def test_uniform_straight_line_motion(self):
        state = RigidBodyState([1.0, 2.0, 3.0], [0.5, -0.25, 1.0], np.zeros(3),
                               IDENTITY_Q)
        props = self.free_props()
        for k in range(100):
            state = step(state, props, no_forces, k * 0.01, 0.01)
        np.testing.assert_allclose(state.position, [1.5, 1.75, 4.0], atol=1e-12)

    def test_free_fall_parabola(self):
        props = BodyProperties(mass=3.0, inertia=np.eye(3))
        state = RigidBodyState([0.0, 0.0, 10.0], np.zeros(3), np.zeros(3), IDENTITY_Q)
        for k in range(100):
            state = step(state, props, no_forces, k * 0.01, 0.01)
        assert abs(state.position[2] - (10.0 - 0.5 * 9.81)) < 1e-12

    def test_constant_force_acceleration(self):
        props = self.free_props()
        state = RigidBodyState(np.zeros(3), np.zeros(3), np.zeros(3), IDENTITY_Q)
        forces = constant_forces([4.0, 0.0, 0.0], [0.0, 0.0, 0.0])
        for k in range(100):
            state = step(state, props, forces, k * 0.01, 0.01)
        # a = F/m = 2, x = a t^2 / 2 = 1 at t = 1
        assert abs(state.position[0] - 1.0) < 1e-12

    def test_torque_free_symmetric_top_conservation(self):
        props = self.free_props(inertia=np.diag([1.0, 1.0, 2.0]))
        state = RigidBodyState(np.zeros(3), np.zeros(3), [0.1, 0.0, 1.0], IDENTITY_Q)
        r0 = quat_to_rotation(state.quaternion)
        j0 = r0 @ props.inertia @ r0.T
        momentum0 = j0 @ state.angular_velocity
        energy0 = 0.5 * state.angular_velocity @ momentum0
        for k in range(10_000):
            state = step(state, props, no_forces, k * 1e-3, 1e-3)
            assert abs(quat_norm(state.quaternion) - 1.0) < 1e-12
        r = quat_to_rotation(state.quaternion)
        j = r @ props.inertia @ r.T
        momentum = j @ state.angular_velocity
        energy = 0.5 * state.angular_velocity @ momentum
        assert np.abs(momentum - momentum0).max() < 1e-6 * np.linalg.norm(momentum0)
        assert abs(energy - energy0) < 1e-6 * energy0

    def test_norm_drift_per_raw_step(self):
        props = self.free_props(inertia=np.diag([1.0, 2.0, 3.0]))
        state = RigidBodyState(np.zeros(3), np.zeros(3), [0.7, -0.4, 1.1], IDENTITY_Q)
        raw = step(state, props, no_forces, 0.0, 1e-2, renormalize=False)
        assert abs(quat_norm(raw.quaternion) - 1.0) < 1e-8

    def test_invalid_dt(self):
        state = RigidBodyState(np.zeros(3), np.zeros(3), np.zeros(3), IDENTITY_Q)
        with pytest.raises(DomainError):
            step(state, self.free_props(), no_forces, 0.0, 0.0)


class TestSimulate:
    def test_trajectory_shape_and_csv(self, tmp_path):
        props = BodyProperties(mass=1.0, inertia=np.eye(3))
        state = RigidBodyState([0, 0, 0], [1.0, 0, 0], [0, 0, 0.5], IDENTITY_Q)
        times, states = simulate(state, props, no_forces, 0.0, 1.0, 0.1)
        assert len(times) == 11
        assert states.shape == (11, 13)
        path = tmp_path / "traj.csv"
        save_trajectory_csv(path, times, states)
        lines = path.read_text().splitlines()
        assert lines[0].startswith("t,x,y,z")
        assert len(lines) == 12

    def test_bad_interval(self):
        props = BodyProperties(mass=1.0, inertia=np.eye(3))
        state = RigidBodyState(np.zeros(3), np.zeros(3), np.zeros(3), IDENTITY_Q)
        with pytest.raises(DomainError):
            simulate(state, props, no_forces, 1.0, 1.0, 0.1)
