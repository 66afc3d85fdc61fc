"""Tests for the crutch-walking environment and observation normalization."""

import numpy as np
import pytest

from crutchgait.engines import dynamics
from crutchgait.engines.base_env import RunningMeanStd
from crutchgait.engines.env import (
    CrutchWalkEnv,
    ObservationLayout,
    assemble_observation,
    pitch_quaternion,
    summarize_state,
)
from crutchgait.engines.model import aggregate_inertia, com_jacobian, nominal_pose
from crutchgait.shared.config import RewardConfig
from crutchgait.shared.models import RewardBreakdown, TerminationCause


@pytest.fixture
def env(subject_model):
    """Crutch-walking environment with a short horizon."""
    return CrutchWalkEnv(subject_model, horizon=50, seed=0)


class TestObservationLayout:
    """Test suite for the flat observation layout."""

    def test_size_and_order(self):
        """Test the 46-slot layout and its field order."""
        layout = ObservationLayout()
        assert layout.size == 46
        assert layout.slices["base_quaternion"] == slice(0, 4)
        assert layout.slices["joint_angles"] == slice(4, 14)
        assert layout.slices["contact_displacements"] == slice(14, 18)
        assert layout.slices["base_pitch_rate"] == slice(18, 19)
        assert layout.slices["actuator_torques"] == slice(36, 46)

    def test_decode_inverts_encode(self):
        """Test decoding an encoded observation returns the parts."""
        layout = ObservationLayout()
        observation = np.arange(46, dtype=float)
        parts = layout.decode(observation)
        np.testing.assert_array_equal(layout.encode(parts), observation)

    def test_rejects_wrong_widths(self):
        """Test malformed vectors and fields are rejected."""
        layout = ObservationLayout()
        with pytest.raises(ValueError, match="length 46"):
            layout.decode(np.zeros(45))
        parts = layout.decode(np.zeros(46))
        parts["com_velocity"] = np.zeros(3)
        with pytest.raises(ValueError, match="com_velocity"):
            layout.encode(parts)

    def test_pitch_quaternion_is_unit(self):
        """Test the base orientation quaternion has unit norm."""
        for pitch in (-1.0, 0.0, 0.35, 2.5):
            assert np.linalg.norm(pitch_quaternion(pitch)) == pytest.approx(1.0, abs=1e-15)
        np.testing.assert_array_equal(pitch_quaternion(0.0), [1.0, 0.0, 0.0, 0.0])

    def test_pitch_quaternion_quarter_turn(self):
        """Test a quarter-turn pitch gives (√2/2, 0, √2/2, 0)."""
        half = np.sqrt(2.0) / 2.0
        np.testing.assert_allclose(pitch_quaternion(np.pi / 2.0), [half, 0.0, half, 0.0], atol=1e-15)

    def test_observation_reflects_state(self, subject_model):
        """Test every raw slot carries the matching quantity of the state."""
        rng = np.random.default_rng(4)
        q = nominal_pose(subject_model)
        q[1] -= 0.002
        q[2] = 0.3
        qd = rng.normal(0.0, 0.2, size=subject_model.dof)
        state = dynamics.initial_state(subject_model, q, qd)
        state.last_torques = rng.uniform(-20.0, 20.0, size=subject_model.n_joints)
        joints = subject_model.joint_coordinates

        parts = ObservationLayout().decode(assemble_observation(subject_model, state))

        np.testing.assert_array_equal(parts["base_quaternion"], pitch_quaternion(0.3))
        np.testing.assert_array_equal(parts["joint_angles"], q[joints])
        np.testing.assert_array_equal(parts["contact_displacements"], state.contact_disp)
        assert parts["base_pitch_rate"][0] == qd[2]
        np.testing.assert_array_equal(parts["joint_velocities"], qd[joints])
        np.testing.assert_array_equal(parts["contact_rates"], state.contact_rate)
        np.testing.assert_allclose(
            parts["com_velocity"], com_jacobian(subject_model, q) @ qd, rtol=0.0, atol=1e-12
        )
        assert parts["com_inertia"][0] == pytest.approx(aggregate_inertia(subject_model, q), abs=1e-12)
        assert parts["com_inertia"][0] > 0.0
        np.testing.assert_array_equal(parts["actuator_torques"], state.last_torques)


class TestCrutchWalkEnv:
    """Test suite for reset, step and termination."""

    def test_reset_returns_observation(self, env):
        """Test reset yields a finite 46-vector and clears the step count."""
        observation = env.reset(seed=3)
        assert observation.shape == (46,)
        assert np.all(np.isfinite(observation))
        assert env.elapsed_steps == 0
        assert env.action_size == 10

    def test_reset_is_seeded(self, subject_model):
        """Test equal seeds give equal initial states and different seeds do not."""
        a = CrutchWalkEnv(subject_model, seed=0)
        b = CrutchWalkEnv(subject_model, seed=0)
        np.testing.assert_array_equal(a.reset(seed=7), b.reset(seed=7))
        assert not np.array_equal(a.reset(seed=7), b.reset(seed=8))

    def test_reset_noise_is_bounded(self, env, subject_model):
        """Test the initial pose stays within the noise amplitude of the stance."""
        env.reset(seed=1)
        deviation = np.abs(env.state.q - nominal_pose(subject_model))
        assert np.all(deviation <= env.reset_noise)

    def test_step_reward_is_breakdown_total(self, env):
        """Test the returned reward is the sum of its terms."""
        env.reset(seed=2)
        result = env.step(np.zeros(10))
        assert result.reward == result.breakdown.total
        assert result.reward == pytest.approx(sum(result.breakdown.terms().values()), abs=1e-12)
        assert not result.done
        assert result.cause is None
        assert result.info["step"] == 1
        assert result.info["time"] == pytest.approx(env.timestep * env.substeps)
        for key in ("com_x", "com_velocity_x", "pitch", "d_crutch_l", "d_foot_r", "diverged"):
            assert key in result.info

    def test_step_is_deterministic(self, subject_model):
        """Test identical seeds and actions give identical trajectories."""
        actions = np.random.default_rng(0).uniform(-20.0, 20.0, size=(5, 10))
        runs = []
        for _ in range(2):
            env = CrutchWalkEnv(subject_model, seed=4)
            env.reset(seed=4)
            runs.append([env.step(a).reward for a in actions])
        assert runs[0] == runs[1]

    def test_rejects_wrong_action_length(self, env):
        """Test actions must cover every joint."""
        env.reset(seed=0)
        with pytest.raises(ValueError, match="length 10"):
            env.step(np.zeros(6))

    def test_fall_terminates(self, subject_model):
        """Test a base at or below the minimum height ends the episode."""
        cfg = RewardConfig(p_z_min=2.0, p_z_max=3.0)
        env = CrutchWalkEnv(subject_model, reward_cfg=cfg, seed=0)
        env.reset(seed=0)
        result = env.step(np.zeros(10))
        assert result.done
        assert result.cause is TerminationCause.FALL
        assert result.breakdown.r_dont_fall == 0.0

    def test_horizon_terminates(self, subject_model):
        """Test the episode ends after exactly horizon steps."""
        env = CrutchWalkEnv(subject_model, horizon=3, seed=0)
        env.reset(seed=0)
        results = [env.step(np.zeros(10)) for _ in range(3)]
        assert [r.done for r in results] == [False, False, True]
        assert results[-1].cause is TerminationCause.HORIZON

    def test_divergence_ends_episode_without_reward(self, env, subject_model):
        """Test a diverging simulation terminates with zero reward."""
        env.reset(seed=0)
        qd = np.zeros(subject_model.dof)
        qd[5] = 1.0e200
        env.set_state(dynamics.initial_state(subject_model, env.state.q, qd))
        with np.errstate(all="ignore"):
            result = env.step(np.zeros(10))
        assert result.done
        assert result.reward == 0.0
        assert result.cause is TerminationCause.DIVERGENCE
        assert result.breakdown == RewardBreakdown.zero()
        assert result.info["diverged"] is True

    def test_torques_are_clipped_into_observation(self, env, subject_model):
        """Test the observed actuator torques are the clipped commands."""
        env.reset(seed=0)
        env.step(np.full(10, 1.0e5))
        parts = env.layout.decode(env.raw_observation())
        np.testing.assert_array_equal(parts["actuator_torques"], subject_model.torque_limits)

    def test_summary_reads_crutch_compressions(self, subject_model):
        """Test reward inputs take crutch depths from the contact state."""
        q = nominal_pose(subject_model)
        q[1] -= 0.003
        state = dynamics.initial_state(subject_model, q)
        inputs = summarize_state(subject_model, state)
        assert inputs.d_crutch_l == pytest.approx(0.003, abs=1e-9)
        assert inputs.d_crutch_r == pytest.approx(0.003, abs=1e-9)
        assert inputs.p_y == 0.0
        assert len(inputs.exo_torques) == 6


class TestRunningMeanStd:
    """Test suite for the observation normalizer."""

    def test_matches_batch_statistics(self):
        """Test merged batches reproduce the pooled mean and variance."""
        rng = np.random.default_rng(0)
        data = rng.normal(3.0, 2.0, size=(300, 4))
        stats = RunningMeanStd((4,), initial_count=0.0)
        for chunk in np.array_split(data, 7):
            stats.update(chunk)
        np.testing.assert_allclose(stats.mean, data.mean(axis=0), rtol=1e-10)
        np.testing.assert_allclose(stats.var, data.var(axis=0), rtol=1e-10)

    def test_frozen_statistics_do_not_move(self):
        """Test a frozen normalizer ignores updates."""
        stats = RunningMeanStd((2,))
        stats.frozen = True
        stats.update(np.ones((5, 2)))
        np.testing.assert_array_equal(stats.mean, np.zeros(2))

    def test_normalize_clips(self):
        """Test normalized values are clipped to the configured range."""
        stats = RunningMeanStd((1,), clip=5.0)
        assert stats.normalize(np.array([1.0e6]))[0] == 5.0

    def test_state_dict_round_trip(self):
        """Test statistics survive a state-dict round trip."""
        stats = RunningMeanStd((3,))
        stats.update(np.random.default_rng(1).normal(size=(10, 3)))
        restored = RunningMeanStd.from_state_dict(stats.state_dict(), frozen=True)
        np.testing.assert_array_equal(restored.mean, stats.mean)
        np.testing.assert_array_equal(restored.var, stats.var)
        assert restored.frozen

    def test_observe_does_not_update(self, subject_model):
        """Test statistics move on reset and step but not on observe."""
        env = CrutchWalkEnv(subject_model, normalizer=RunningMeanStd((46,)), seed=0)
        env.reset(seed=0)
        count = env.normalizer.count
        env.observe()
        assert env.normalizer.count == count
        env.step(np.zeros(10))
        assert env.normalizer.count == count + 1
