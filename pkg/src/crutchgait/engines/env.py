"""Crutch-walking environment around the planar body simulator."""

import logging
from typing import Any, Dict, Optional, Tuple

import numpy as np

from crutchgait.engines import dynamics
from crutchgait.engines.base_env import LocomotionEnv, RunningMeanStd
from crutchgait.engines.model import (
    EXO_JOINT_COUNT,
    RobotModel,
    aggregate_inertia,
    com_jacobian,
    nominal_pose,
    total_com,
)
from crutchgait.engines.rewards import total_reward
from crutchgait.shared.config import RewardConfig
from crutchgait.shared.errors import SimulationDivergedError
from crutchgait.shared.models import (
    RewardBreakdown,
    RewardInputs,
    SimState,
    StepResult,
    TerminationCause,
)


logger = logging.getLogger(__name__)


class ObservationLayout:
    """Published slot layout of the flat observation vector."""

    def __init__(self, n_joints: int = 10, n_contacts: int = 4):
        self.fields: Tuple[Tuple[str, int], ...] = (
            ("base_quaternion", 4),
            ("joint_angles", n_joints),
            ("contact_displacements", n_contacts),
            ("base_pitch_rate", 1),
            ("joint_velocities", n_joints),
            ("contact_rates", n_contacts),
            ("com_velocity", 2),
            ("com_inertia", 1),
            ("actuator_torques", n_joints),
        )
        self.slices: Dict[str, slice] = {}
        start = 0
        for name, width in self.fields:
            self.slices[name] = slice(start, start + width)
            start += width
        self.size = start

    def decode(self, observation: np.ndarray) -> Dict[str, np.ndarray]:
        observation = np.asarray(observation)
        if observation.shape != (self.size,):
            raise ValueError(f"expected observation of length {self.size}, got {observation.shape}")
        return {name: observation[s].copy() for name, s in self.slices.items()}

    def encode(self, parts: Dict[str, np.ndarray]) -> np.ndarray:
        observation = np.empty(self.size)
        for name, width in self.fields:
            value = np.asarray(parts[name], dtype=float).reshape(-1)
            if value.shape != (width,):
                raise ValueError(f"field {name} needs {width} values, got {value.shape[0]}")
            observation[self.slices[name]] = value
        return observation


def pitch_quaternion(pitch: float) -> np.ndarray:
    """Unit quaternion (w, x, y, z) of a rotation about the lateral axis."""
    half = 0.5 * pitch
    return np.array([np.cos(half), 0.0, np.sin(half), 0.0])


def assemble_observation(
    model: RobotModel, state: SimState, layout: Optional[ObservationLayout] = None
) -> np.ndarray:
    """Raw observation vector of a state in the published layout."""
    layout = layout or ObservationLayout(model.n_joints, len(model.contact_spheres))
    joints = model.joint_coordinates
    return layout.encode({
        "base_quaternion": pitch_quaternion(state.q[2]),
        "joint_angles": state.q[joints],
        "contact_displacements": state.contact_disp,
        "base_pitch_rate": state.qd[2],
        "joint_velocities": state.qd[joints],
        "contact_rates": state.contact_rate,
        "com_velocity": com_jacobian(model, state.q) @ state.qd,
        "com_inertia": aggregate_inertia(model, state.q),
        "actuator_torques": state.last_torques,
    })


def summarize_state(model: RobotModel, state: SimState) -> RewardInputs:
    """Extract the quantities the reward terms consume."""
    q = state.q

    def angle(name: str) -> float:
        return float(q[model.joints[model.joint_index(name)].coordinate])

    com_velocity = com_jacobian(model, q) @ state.qd
    return RewardInputs(
        p_x_dot=float(com_velocity[0]),
        p_y=0.0,
        p_z=float(q[1]),
        a_z=float(q[2]),
        exo_torques=tuple(float(t) for t in state.last_torques[:EXO_JOINT_COUNT]),
        hip_r=angle("hip_r"),
        knee_r=angle("knee_r"),
        ankle_r=angle("ankle_r"),
        hip_l=angle("hip_l"),
        knee_l=angle("knee_l"),
        ankle_l=angle("ankle_l"),
        d_crutch_r=float(state.contact_disp[model.sphere_index("crutch_r")]),
        d_crutch_l=float(state.contact_disp[model.sphere_index("crutch_l")]),
    )


class CrutchWalkEnv(LocomotionEnv):
    """
    Torque-controlled crutch walking task.

    One control step holds the action for ``substeps`` physics steps. Episodes
    end when the base drops to ``p_z_min`` or below, when the horizon is
    reached, or when the simulation diverges.
    """

    def __init__(
        self,
        model: RobotModel,
        reward_cfg: Optional[RewardConfig] = None,
        horizon: int = 2000,
        timestep: float = 0.005,
        substeps: int = 4,
        reset_noise: float = 0.005,
        normalizer: Optional[RunningMeanStd] = None,
        seed: Optional[int] = None,
    ):
        super().__init__(normalizer)
        if horizon < 1:
            raise ValueError(f"horizon must be at least 1, got {horizon}")
        self.model = model
        self.reward_cfg = reward_cfg or RewardConfig()
        self.horizon = horizon
        self.timestep = timestep
        self.substeps = substeps
        self.reset_noise = reset_noise
        self.layout = ObservationLayout(model.n_joints, len(model.contact_spheres))
        self._rng = np.random.default_rng(seed)
        self._nominal = nominal_pose(model)
        self._state = dynamics.initial_state(model, self._nominal)

    @property
    def observation_size(self) -> int:
        return self.layout.size

    @property
    def action_size(self) -> int:
        return self.model.n_joints

    @property
    def state(self) -> SimState:
        return self._state

    def set_state(self, state: SimState) -> None:
        """Replace the simulator state (the step counter is kept)."""
        self._state = state.copy()

    def reset(self, seed: Optional[int] = None) -> np.ndarray:
        if seed is not None:
            self._rng = np.random.default_rng(seed)
        noise = self._rng.uniform(-self.reset_noise, self.reset_noise, size=self.model.dof)
        self._state = dynamics.initial_state(self.model, self._nominal + noise)
        self._elapsed_steps = 0
        return self._emit()

    def raw_observation(self) -> np.ndarray:
        return assemble_observation(self.model, self._state, self.layout)

    def step(self, action: np.ndarray) -> StepResult:
        action = np.asarray(action, dtype=float).reshape(-1)
        if action.shape != (self.action_size,):
            raise ValueError(f"expected action of length {self.action_size}, got {action.shape[0]}")
        torques = dynamics.clamp_torques(self.model, action)

        state = self._state
        try:
            for _ in range(self.substeps):
                state = dynamics.step(self.model, state, torques, self.timestep)
        except SimulationDivergedError as e:
            self._elapsed_steps += 1
            logger.warning(f"Episode diverged after {self._elapsed_steps} steps: {e}")
            info = self._info(self._state, diverged=True)
            return StepResult(
                observation=self.observe(),
                reward=0.0,
                done=True,
                breakdown=RewardBreakdown.zero(),
                info=info,
                cause=TerminationCause.DIVERGENCE,
            )

        self._state = state
        self._elapsed_steps += 1
        inputs = summarize_state(self.model, state)
        breakdown = total_reward(inputs, self.reward_cfg)

        cause = None
        if inputs.p_z <= self.reward_cfg.p_z_min:
            cause = TerminationCause.FALL
        elif self._elapsed_steps >= self.horizon:
            cause = TerminationCause.HORIZON
        if cause is TerminationCause.FALL:
            logger.debug(f"Fall at step {self._elapsed_steps} (p_z={inputs.p_z:.3f})")

        return StepResult(
            observation=self._emit(),
            reward=breakdown.total,
            done=cause is not None,
            breakdown=breakdown,
            info=self._info(state, diverged=False, inputs=inputs),
            cause=cause,
        )

    def _info(
        self, state: SimState, diverged: bool, inputs: Optional[RewardInputs] = None
    ) -> Dict[str, Any]:
        inputs = inputs or summarize_state(self.model, state)
        com_x, com_z = total_com(self.model, state.q)
        velocity = com_jacobian(self.model, state.q) @ state.qd
        info: Dict[str, Any] = {
            "step": self._elapsed_steps,
            "time": state.time,
            "com_x": com_x,
            "com_z": com_z,
            "com_velocity_x": float(velocity[0]),
            "com_velocity_z": float(velocity[1]),
            "base_height": inputs.p_z,
            "pitch": inputs.a_z,
            "lateral_position": inputs.p_y,
            "diverged": diverged,
        }
        for index, sphere in enumerate(self.model.contact_spheres):
            info[f"d_{sphere.name}"] = float(state.contact_disp[index])
        return info
