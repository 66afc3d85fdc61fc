"""Environment interface and running observation normalization."""

from abc import ABC, abstractmethod
from typing import Dict, Optional, Tuple

import numpy as np

from crutchgait.shared.models import StepResult


class RunningMeanStd:
    """
    Running mean and variance of observation vectors.

    Batches are merged with the parallel variance formula. While ``frozen`` the
    statistics are only read.
    """

    def __init__(
        self,
        shape: Tuple[int, ...],
        clip: float = 10.0,
        epsilon: float = 1e-8,
        initial_count: float = 1e-4,
    ):
        self.mean = np.zeros(shape)
        self.var = np.ones(shape)
        self.count = initial_count
        self.clip = clip
        self.epsilon = epsilon
        self.frozen = False

    def update(self, batch: np.ndarray) -> None:
        if self.frozen:
            return
        batch = np.asarray(batch, dtype=float).reshape((-1,) + self.mean.shape)
        batch_mean = batch.mean(axis=0)
        batch_var = batch.var(axis=0)
        batch_count = batch.shape[0]

        delta = batch_mean - self.mean
        total = self.count + batch_count
        self.mean = self.mean + delta * batch_count / total
        m2 = self.var * self.count + batch_var * batch_count
        m2 += delta**2 * self.count * batch_count / total
        self.var = m2 / total
        self.count = total

    def normalize(self, x: np.ndarray) -> np.ndarray:
        scaled = (np.asarray(x, dtype=float) - self.mean) / np.sqrt(self.var + self.epsilon)
        return np.clip(scaled, -self.clip, self.clip)

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {"mean": self.mean.copy(), "var": self.var.copy(), "count": np.array(self.count)}

    @classmethod
    def from_state_dict(
        cls, state: Dict[str, np.ndarray], frozen: bool = False
    ) -> "RunningMeanStd":
        stats = cls(np.shape(state["mean"]))
        stats.mean = np.array(state["mean"], dtype=float)
        stats.var = np.array(state["var"], dtype=float)
        stats.count = float(state["count"])
        stats.frozen = frozen
        return stats


class LocomotionEnv(ABC):
    """Base class for reset/step environments with optional observation normalization."""

    def __init__(self, normalizer: Optional[RunningMeanStd] = None):
        self.normalizer = normalizer
        self._elapsed_steps = 0

    @property
    @abstractmethod
    def observation_size(self) -> int:
        """Length of the observation vector."""

    @property
    @abstractmethod
    def action_size(self) -> int:
        """Length of the action vector."""

    @abstractmethod
    def reset(self, seed: Optional[int] = None) -> np.ndarray:
        """
        Start a new episode.

        Args:
            seed: Reseeds the environment's noise stream when given; otherwise
                the stream continues

        Returns:
            Initial observation
        """

    @abstractmethod
    def step(self, action: np.ndarray) -> StepResult:
        """Apply one action and advance one control step."""

    @abstractmethod
    def raw_observation(self) -> np.ndarray:
        """Observation of the current state before normalization."""

    @property
    def elapsed_steps(self) -> int:
        return self._elapsed_steps

    def observe(self) -> np.ndarray:
        """Current observation, normalized when a normalizer is attached."""
        raw = self.raw_observation()
        return self.normalizer.normalize(raw) if self.normalizer is not None else raw

    def _emit(self) -> np.ndarray:
        # statistics only move on reset/step, never on a bare observe()
        raw = self.raw_observation()
        if self.normalizer is None:
            return raw
        self.normalizer.update(raw)
        return self.normalizer.normalize(raw)
