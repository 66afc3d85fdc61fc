"""Tests for rigid-body dynamics, contacts and the integrator."""

import numpy as np
import pandas as pd
import pytest
from scipy.integrate import solve_ivp

from crutchgait.engines.dynamics import (
    TrajectoryRecorder,
    bias_forces,
    clamp_torques,
    contact_forces,
    forward_dynamics,
    initial_state,
    mass_matrix,
    mechanical_energy,
    mirror_state,
    step,
)
from crutchgait.engines.model import (
    ContactSphere,
    Link,
    RobotModel,
    build_subject_model,
    com_jacobian,
    forward_kinematics,
    nominal_pose,
    sphere_world_centers,
)
from crutchgait.shared.config import ModelConfig, SubjectMeasurements
from crutchgait.shared.errors import SimulationDivergedError


def random_state(model: RobotModel, rng: np.random.Generator):
    q = nominal_pose(model)
    q[model.joint_coordinates] = rng.uniform(model.joint_lower, model.joint_upper)
    q[2] = rng.uniform(-0.3, 0.3)
    qd = rng.normal(0.0, 1.0, size=model.dof)
    return q, qd


def potential(model: RobotModel, q: np.ndarray) -> float:
    coms = forward_kinematics(model, q).coms
    return model.gravity * float(model.masses @ coms[:, 1])


def resting_box(mass: float = 10.0) -> RobotModel:
    """Rigid plank on two contact spheres 0.4 m apart."""
    plank = Link("plank", 0.4, mass, 0.2, 0.0, "floating_base", axis=(1.0, 0.0))
    spheres = tuple(
        ContactSphere(name, 0, (x, 0.0), 0.02, 1.0e4, 100.0)
        for name, x in (("foot_l", -0.2), ("foot_r", 0.2))
    )
    return RobotModel(links=(plank,), joints=(), contact_spheres=spheres)


class TestMassMatrix:
    """Test suite for the joint-space inertia matrix."""

    def test_pendulum_entry(self, pendulum_factory):
        """Test a hinged rod has inertia m·lc² + I_com about the hinge."""
        model = pendulum_factory(mass=1.0, length=1.0, com=0.5)
        assert mass_matrix(model, np.array([0.4]))[0, 0] == pytest.approx(0.25 + 1.0 / 12.0, abs=1e-14)

    def test_symmetric_positive_definite(self, subject_model):
        """Test M = Mᵀ and xᵀMx > 0 for random x."""
        rng = np.random.default_rng(0)
        for _ in range(5):
            q, _ = random_state(subject_model, rng)
            m = mass_matrix(subject_model, q)
            np.testing.assert_allclose(m, m.T, atol=1e-10)
            x = rng.normal(size=(100, subject_model.dof))
            assert np.all(np.einsum("kd,de,ke->k", x, m, x) > 0.0)

    def test_matches_finite_difference_jacobians(self, subject_model):
        """Test M against Σ mᵢJᵢᵀJᵢ + Iᵢωᵢᵀωᵢ from numerically differentiated kinematics."""
        rng = np.random.default_rng(1)
        q, _ = random_state(subject_model, rng)
        h = 1e-6
        dof = subject_model.dof
        n = len(subject_model.links)
        lin = np.zeros((n, 2, dof))
        ang = np.zeros((n, dof))
        for d in range(dof):
            e = np.zeros(dof)
            e[d] = h
            plus, minus = forward_kinematics(subject_model, q + e), forward_kinematics(subject_model, q - e)
            lin[:, :, d] = (plus.coms - minus.coms) / (2 * h)
            ang[:, d] = (plus.angles - minus.angles) / (2 * h)
        expected = np.zeros((dof, dof))
        for i in range(n):
            expected += subject_model.masses[i] * lin[i].T @ lin[i]
            expected += subject_model.inertias[i] * np.outer(ang[i], ang[i])
        np.testing.assert_allclose(mass_matrix(subject_model, q), expected, atol=1e-6)


class TestBiasForces:
    """Test suite for Coriolis, centrifugal and gravity terms."""

    def test_zero_velocity_is_gravity_gradient(self, subject_model):
        """Test bias at rest equals the gradient of gravitational potential."""
        rng = np.random.default_rng(2)
        q, _ = random_state(subject_model, rng)
        h = 1e-6
        grad = np.array([
            (potential(subject_model, q + h * e) - potential(subject_model, q - h * e)) / (2 * h)
            for e in np.eye(subject_model.dof)
        ])
        np.testing.assert_allclose(
            bias_forces(subject_model, q, np.zeros(subject_model.dof)), grad, atol=1e-6
        )

    def test_no_gravity_at_rest_is_zero(self):
        """Test a weightless body at rest has no bias force."""
        model = build_subject_model(SubjectMeasurements(), ModelConfig(gravity=0.0))
        q = nominal_pose(model)
        np.testing.assert_allclose(bias_forces(model, q, np.zeros(model.dof)), 0.0, atol=1e-12)

    def test_lagrangian_identity(self, subject_model):
        """Test bias = (Σ ∂M/∂q_j q̇_j) q̇ − ½ q̇ᵀ ∂M/∂q q̇ + ∂V/∂q."""
        rng = np.random.default_rng(3)
        q, qd = random_state(subject_model, rng)
        h = 1e-5
        dof = subject_model.dof
        dm = np.zeros((dof, dof, dof))
        grad_v = np.zeros(dof)
        for j in range(dof):
            e = np.zeros(dof)
            e[j] = h
            dm[j] = (mass_matrix(subject_model, q + e) - mass_matrix(subject_model, q - e)) / (2 * h)
            grad_v[j] = (potential(subject_model, q + e) - potential(subject_model, q - e)) / (2 * h)
        m_dot = np.einsum("jab,j->ab", dm, qd)
        expected = m_dot @ qd - 0.5 * np.einsum("a,jab,b->j", qd, dm, qd) + grad_v
        np.testing.assert_allclose(bias_forces(subject_model, q, qd), expected, rtol=1e-6, atol=1e-5)


class TestContactForces:
    """Test suite for penalty ground contact."""

    def test_no_force_above_ground(self, subject_model):
        """Test spheres 5 cm above the ground carry nothing."""
        q = nominal_pose(subject_model)
        q[1] += 0.05
        for force in contact_forces(subject_model, q, np.zeros(subject_model.dof)):
            assert force.normal == 0.0
            assert force.displacement == 0.0
            assert force.tangential == 0.0

    def test_spring_law(self, subject_model):
        """Test 1 cm compression at rest gives k·d = 100 N per sphere."""
        q = nominal_pose(subject_model)
        q[1] -= 0.01
        for force in contact_forces(subject_model, q, np.zeros(subject_model.dof)):
            assert force.displacement == pytest.approx(0.01, abs=1e-9)
            assert force.normal == pytest.approx(100.0, abs=1e-5)
            assert force.rate == 0.0

    def test_property_friction_cone_and_complementarity(self, subject_model):
        """Test |f_t| ≤ μN, N ≥ 0, d ≥ 0 and N = 0 whenever d = 0."""
        rng = np.random.default_rng(4)
        mu = subject_model.friction_coefficient
        for _ in range(50):
            q, qd = random_state(subject_model, rng)
            q[1] += rng.uniform(-0.03, 0.03)
            for force in contact_forces(subject_model, q, qd):
                assert force.displacement >= 0.0
                assert force.normal >= 0.0
                assert abs(force.tangential) <= mu * force.normal + 1e-12
                if force.displacement == 0.0:
                    assert force.normal == 0.0

    def test_static_stance_supports_body_weight(self, subject_model):
        """Test feet compressed by W/2k carry the full weight and leave the CoM unaccelerated."""
        model = subject_model
        q = nominal_pose(model)
        for name in ("shoulder_l", "shoulder_r"):
            q[model.joints[model.joint_index(name)].coordinate] = -1.2
        weight = model.total_mass * model.gravity
        stiffness = model.sphere_stiffness[0]
        q[1] -= weight / (2.0 * stiffness)

        forces = {f.sphere: f for f in contact_forces(model, q, np.zeros(model.dof))}
        assert forces["crutch_l"].normal == 0.0
        assert forces["crutch_r"].normal == 0.0
        total = sum(f.normal for f in forces.values())
        assert total == pytest.approx(weight, rel=0.01)
        for name in ("foot_l", "foot_r"):
            assert forces[name].displacement == pytest.approx(
                forces[name].normal / stiffness, rel=0.01
            )

        state = initial_state(model, q)
        qdd = forward_dynamics(model, state, np.zeros(model.n_joints))
        com_acc = com_jacobian(model, q) @ qdd
        assert abs(com_acc[1]) < 0.01 * model.gravity

    def test_settled_plank_rests_on_springs(self):
        """Test a plank dropped onto two spheres settles with ΣN = mg and d = N/k."""
        model = resting_box(mass=10.0)
        state = initial_state(model, np.array([0.0, 0.021, 0.0]))
        for _ in range(2000):
            state = step(model, state, np.zeros(0), 1e-3)
        forces = contact_forces(model, state.q, state.qd)
        total = sum(f.normal for f in forces)
        assert total == pytest.approx(10.0 * model.gravity, rel=0.01)
        for force in forces:
            assert force.displacement == pytest.approx(force.normal / 1.0e4, rel=0.01)
        np.testing.assert_allclose(state.contact_disp, [f.displacement for f in forces])


class TestStep:
    """Test suite for the semi-implicit integrator."""

    def test_free_fall_acceleration(self, subject_model):
        """Test an airborne body's CoM accelerates at exactly −g."""
        q = nominal_pose(subject_model)
        q[1] += 5.0
        state = initial_state(subject_model, q)
        qdd = forward_dynamics(subject_model, state, np.zeros(subject_model.n_joints))
        acc = com_jacobian(subject_model, q) @ qdd
        assert abs(acc[0]) < 1e-9
        assert abs(acc[1] + subject_model.gravity) < 1e-9

    def test_pendulum_tracks_reference_integrator(self, pendulum_factory):
        """Test a 1 s pendulum swing against DOP853 within 1e-3 rad."""
        m, length, lc, g = 1.0, 1.0, 0.5, 9.81
        model = pendulum_factory(mass=m, length=length, com=lc, gravity=g)
        inertia = m * length**2 / 12.0 + m * lc**2
        dt, theta0 = 1e-3, 0.2

        reference = solve_ivp(
            lambda t, y: [y[1], -(m * g * lc / inertia) * np.sin(y[0])],
            (0.0, 1.0), [theta0, 0.0], method="DOP853", rtol=1e-12, atol=1e-12, dense_output=True,
        )
        state = initial_state(model, np.array([theta0]))
        worst = 0.0
        for k in range(1, 1001):
            state = step(model, state, np.zeros(1), dt)
            worst = max(worst, abs(state.q[0] - reference.sol(k * dt)[0]))
        assert worst < 1e-3

    def test_energy_drift_without_damping(self):
        """Test an airborne undamped body conserves energy within 0.5% over 1 s."""
        model = build_subject_model(SubjectMeasurements(), ModelConfig(limit_damping=0.0))
        q = nominal_pose(model)
        q[1] += 10.0
        qd = np.zeros(model.dof)
        qd[model.joint_coordinates] = np.linspace(-0.5, 0.5, model.n_joints)
        state = initial_state(model, q, qd)
        start = mechanical_energy(model, state.q, state.qd)
        for _ in range(1000):
            state = step(model, state, np.zeros(model.n_joints), 1e-3)
        assert abs(mechanical_energy(model, state.q, state.qd) - start) < 0.005 * abs(start)

    def test_deterministic(self, subject_model):
        """Test identical inputs give bitwise-identical outputs."""
        state = initial_state(subject_model, nominal_pose(subject_model))
        torques = np.linspace(-20.0, 20.0, subject_model.n_joints)
        a = step(subject_model, state, torques, 0.005)
        b = step(subject_model, state, torques, 0.005)
        np.testing.assert_array_equal(a.q, b.q)
        np.testing.assert_array_equal(a.qd, b.qd)
        np.testing.assert_array_equal(a.contact_disp, b.contact_disp)

    def test_mirror_symmetry(self, subject_model):
        """Test stepping a mirrored state with mirrored torques mirrors the result."""
        rng = np.random.default_rng(5)
        q = nominal_pose(subject_model) + rng.uniform(-0.01, 0.01, subject_model.dof)
        qd = rng.normal(0.0, 0.1, subject_model.dof)
        state = initial_state(subject_model, q, qd)
        torques = rng.uniform(-30.0, 30.0, subject_model.n_joints)

        direct = mirror_state(subject_model, step(subject_model, state, torques, 0.005))
        mirrored = step(
            subject_model,
            mirror_state(subject_model, state),
            torques[subject_model.joint_mirror_permutation],
            0.005,
        )
        np.testing.assert_allclose(mirrored.q, direct.q, atol=1e-9)
        np.testing.assert_allclose(mirrored.qd, direct.qd, atol=1e-7)

    def test_torques_are_clamped(self, subject_model):
        """Test commands beyond the limits are clipped and recorded."""
        state = initial_state(subject_model, nominal_pose(subject_model))
        command = np.full(subject_model.n_joints, 1.0e6)
        result = step(subject_model, state, command, 0.005)
        np.testing.assert_array_equal(result.last_torques, subject_model.torque_limits)
        with pytest.raises(ValueError, match="expected 10 torques"):
            clamp_torques(subject_model, np.zeros(6))

    def test_rejects_non_positive_timestep(self, subject_model):
        """Test dt must be positive."""
        state = initial_state(subject_model, nominal_pose(subject_model))
        with pytest.raises(ValueError, match="timestep"):
            step(subject_model, state, np.zeros(subject_model.n_joints), 0.0)

    def test_divergence_is_signalled(self, subject_model):
        """Test a non-finite result raises SimulationDivergedError."""
        qd = np.zeros(subject_model.dof)
        qd[5] = 1.0e200
        state = initial_state(subject_model, nominal_pose(subject_model) + 1.0, qd)
        with np.errstate(all="ignore"), pytest.raises(SimulationDivergedError):
            step(subject_model, state, np.zeros(subject_model.n_joints), 0.005)

    def test_contact_coordinates_follow_state(self, subject_model):
        """Test recorded compressions equal penetration of the new configuration."""
        q = nominal_pose(subject_model)
        state = initial_state(subject_model, q)
        result = step(subject_model, state, np.zeros(subject_model.n_joints), 0.005)
        frames = forward_kinematics(subject_model, result.q)
        bottoms = sphere_world_centers(subject_model, frames)[:, 1] - subject_model.sphere_radii
        np.testing.assert_allclose(result.contact_disp, np.maximum(0.0, -bottoms), atol=1e-15)
        assert result.time == pytest.approx(0.005)


class TestTrajectoryRecorder:
    """Test suite for the per-step CSV dump."""

    def test_header_and_rows(self, subject_model, tmp_path):
        """Test the dump's column layout and row count."""
        recorder = TrajectoryRecorder(subject_model)
        state = initial_state(subject_model, nominal_pose(subject_model))
        for _ in range(3):
            state = step(subject_model, state, np.zeros(subject_model.n_joints), 0.005)
            recorder.record(state)

        path = recorder.write_csv(tmp_path / "trajectory.csv")
        frame = pd.read_csv(path)
        expected = (
            ["time", "qx", "qz", "pitch"]
            + [f"j{i}" for i in range(10)]
            + [f"dj{i}" for i in range(10)]
            + ["d_fl", "d_fr", "d_cl", "d_cr"]
            + [f"tau{i}" for i in range(10)]
        )
        assert list(frame.columns) == expected
        assert len(frame) == 3
        assert frame["time"].iloc[-1] == pytest.approx(0.015)
