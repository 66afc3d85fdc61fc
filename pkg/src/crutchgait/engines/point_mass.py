"""One-dimensional velocity-tracking task used to verify the PPO learner."""

import logging
from typing import Optional

import numpy as np

from crutchgait.engines.base_env import LocomotionEnv, RunningMeanStd
from crutchgait.engines.rewards import r_walk
from crutchgait.shared.config import RewardConfig
from crutchgait.shared.models import RewardBreakdown, StepResult, TerminationCause


logger = logging.getLogger(__name__)


class PointMassEnv(LocomotionEnv):
    """
    Frictionless point mass pushed by a horizontal force.

    The observation is the velocity; the reward is the forward-velocity
    tracking term with a softer width so that learning signal reaches the
    initial velocity spread.
    """

    def __init__(
        self,
        mass: float = 1.0,
        timestep: float = 0.05,
        horizon: int = 200,
        max_force: float = 10.0,
        reward_cfg: Optional[RewardConfig] = None,
        c_walk: float = 50.0,
        initial_velocity_spread: float = 0.5,
        normalizer: Optional[RunningMeanStd] = None,
        seed: Optional[int] = None,
    ):
        super().__init__(normalizer)
        if mass <= 0.0 or timestep <= 0.0:
            raise ValueError("mass and timestep must be positive")
        self.mass = mass
        self.timestep = timestep
        self.horizon = horizon
        self.max_force = max_force
        base = reward_cfg or RewardConfig()
        self.reward_cfg = base.model_copy(update={"c_walk": c_walk})
        self.initial_velocity_spread = initial_velocity_spread
        self._rng = np.random.default_rng(seed)
        self.position = 0.0
        self.velocity = 0.0

    @property
    def observation_size(self) -> int:
        return 1

    @property
    def action_size(self) -> int:
        return 1

    def reset(self, seed: Optional[int] = None) -> np.ndarray:
        if seed is not None:
            self._rng = np.random.default_rng(seed)
        spread = self.initial_velocity_spread
        self.position = 0.0
        self.velocity = float(self._rng.uniform(-spread, spread))
        self._elapsed_steps = 0
        return self._emit()

    def raw_observation(self) -> np.ndarray:
        return np.array([self.velocity])

    def step(self, action: np.ndarray) -> StepResult:
        action = np.asarray(action, dtype=float).reshape(-1)
        if action.shape != (1,):
            raise ValueError(f"expected action of length 1, got {action.shape[0]}")
        force = float(np.clip(action[0], -self.max_force, self.max_force))
        self.velocity += force * self.timestep / self.mass
        self.position += self.velocity * self.timestep
        self._elapsed_steps += 1

        walk = r_walk(self.velocity, self.reward_cfg)
        breakdown = RewardBreakdown(
            r_walk=walk,
            r_walk_straight=0.0,
            r_dont_fall=0.0,
            r_action=0.0,
            r_orientation=0.0,
            r_flat_contact=0.0,
            r_crutch_reaction_force=0.0,
            r_hip_angle=0.0,
            r_ensure_crutch_contact=0.0,
            total=walk,
        )
        done = self._elapsed_steps >= self.horizon
        info = {
            "step": self._elapsed_steps,
            "com_x": self.position,
            "com_velocity_x": self.velocity,
            "pitch": self.reward_cfg.orientation_target,
            "lateral_position": 0.0,
            "d_crutch_l": 0.0,
            "d_crutch_r": 0.0,
            "r_walk": walk,
        }
        return StepResult(
            observation=self._emit(),
            reward=walk,
            done=done,
            breakdown=breakdown,
            info=info,
            cause=TerminationCause.HORIZON if done else None,
        )
