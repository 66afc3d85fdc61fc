"""Core data records shared by the simulator, the learner and the harness."""

from dataclasses import asdict, dataclass, field, fields
from datetime import datetime
from enum import Enum
from typing import Any, Dict, Optional, Tuple

import numpy as np
import yaml


class TerminationCause(str, Enum):
    """Why an episode ended."""
    FALL = "fall"
    HORIZON = "horizon"
    DIVERGENCE = "divergence"


@dataclass
class SimState:
    """Generalized state of the planar body plus contact coordinates."""
    q: np.ndarray
    qd: np.ndarray
    contact_disp: np.ndarray
    contact_rate: np.ndarray
    last_torques: np.ndarray
    time: float = 0.0

    def is_finite(self) -> bool:
        """Return True when every array entry and the clock are finite."""
        arrays = (self.q, self.qd, self.contact_disp, self.contact_rate, self.last_torques)
        return bool(np.isfinite(self.time) and all(np.all(np.isfinite(a)) for a in arrays))

    def copy(self) -> "SimState":
        return SimState(
            q=self.q.copy(),
            qd=self.qd.copy(),
            contact_disp=self.contact_disp.copy(),
            contact_rate=self.contact_rate.copy(),
            last_torques=self.last_torques.copy(),
            time=self.time,
        )


@dataclass(frozen=True)
class ContactForce:
    """Ground reaction on one contact sphere."""
    sphere: str
    normal: float
    tangential: float
    displacement: float
    rate: float


@dataclass(frozen=True)
class RewardInputs:
    """Summary of one state as consumed by the reward terms."""
    p_x_dot: float
    p_y: float
    p_z: float
    a_z: float
    exo_torques: Tuple[float, ...]
    hip_r: float
    knee_r: float
    ankle_r: float
    hip_l: float
    knee_l: float
    ankle_l: float
    d_crutch_r: float
    d_crutch_l: float


@dataclass(frozen=True)
class RewardBreakdown:
    """Per-term reward values of one step; total is their sum."""
    r_walk: float
    r_walk_straight: float
    r_dont_fall: float
    r_action: float
    r_orientation: float
    r_flat_contact: float
    r_crutch_reaction_force: float
    r_hip_angle: float
    r_ensure_crutch_contact: float
    total: float

    @classmethod
    def zero(cls) -> "RewardBreakdown":
        return cls(**{f.name: 0.0 for f in fields(cls)})

    def terms(self) -> Dict[str, float]:
        """Return the nine terms without the total."""
        values = asdict(self)
        values.pop("total")
        return values


@dataclass
class StepResult:
    """Outcome of one environment control step."""
    observation: np.ndarray
    reward: float
    done: bool
    breakdown: RewardBreakdown
    info: Dict[str, Any] = field(default_factory=dict)
    cause: Optional[TerminationCause] = None


@dataclass(frozen=True)
class UpdateStats:
    """Means over all minibatches of one PPO update."""
    actor_loss: float
    critic_loss: float
    entropy: float
    mean_ratio: float
    clip_fraction: float
    entropy_coef: float
    initial_ratio: float
    minibatches: int


@dataclass(frozen=True)
class MetricsReport:
    """Evaluation metrics of one deterministic policy rollout."""
    mean_crutch_cost: float
    mape_velocity: float
    mape_orientation: float
    mean_abs_lateral_displacement: float
    steps: int
    terminated_early: bool = False
    termination_cause: Optional[TerminationCause] = None

    def to_row(self) -> Dict[str, Any]:
        """Flatten into the column names used by eval and comparison CSVs."""
        return {
            "mean_crutch_cost": self.mean_crutch_cost,
            "mape_velocity": self.mape_velocity,
            "mape_orientation": self.mape_orientation,
            "mean_abs_lat_disp": self.mean_abs_lateral_displacement,
            "steps": self.steps,
            "termination_cause": (
                self.termination_cause.value if self.termination_cause else ""
            ),
        }


@dataclass
class RunManifest:
    """Provenance record written next to every run's outputs."""
    command: str
    config_snapshot: str
    config_hash: str
    seed: Optional[int]
    started_at: datetime
    overrides: Dict[str, Any] = field(default_factory=dict)
    artifacts: Dict[str, str] = field(default_factory=dict)

    def to_yaml(self) -> str:
        """Serialize manifest to YAML; the snapshot is kept as a literal block."""
        data = {
            "command": self.command,
            "seed": self.seed,
            "started_at": self.started_at.isoformat(),
            "config_hash": self.config_hash,
            "overrides": self.overrides,
            "artifacts": self.artifacts,
            "config_snapshot": self.config_snapshot,
        }
        return yaml.safe_dump(data, sort_keys=False, allow_unicode=True)

    @classmethod
    def from_yaml(cls, text: str) -> "RunManifest":
        """Deserialize manifest from YAML."""
        data = yaml.safe_load(text)
        started = data["started_at"]
        data["started_at"] = (
            started if isinstance(started, datetime) else datetime.fromisoformat(started)
        )
        return cls(**data)
