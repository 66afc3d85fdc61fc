"""Pydantic configuration models for experiments, the body model, rewards and PPO."""

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Literal, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from crutchgait.shared.errors import ConfigError, InvalidMeasurementsError


logger = logging.getLogger(__name__)

Range = Tuple[float, float]

MEASUREMENT_ORDER = ("ankle_height", "knee_height", "hip_height", "shoulder_height", "height")


def validate_measurements(measurements: "SubjectMeasurements") -> None:
    """
    Check positivity and the vertical ordering of landmark heights.

    Args:
        measurements: Subject measurements to check

    Raises:
        InvalidMeasurementsError: If a field is not strictly positive or the
            ankle < knee < hip < shoulder < height ordering is violated
    """
    for name in SubjectMeasurements.model_fields:
        value = getattr(measurements, name)
        if not value > 0.0:
            raise InvalidMeasurementsError(f"measurement {name} must be positive, got {value}")
    heights = [getattr(measurements, name) for name in MEASUREMENT_ORDER]
    for (low_name, low), (high_name, high) in zip(
        zip(MEASUREMENT_ORDER, heights), zip(MEASUREMENT_ORDER[1:], heights[1:])
    ):
        if not low < high:
            raise InvalidMeasurementsError(
                f"{low_name} ({low}) must be below {high_name} ({high})"
            )
    if measurements.arm_span <= measurements.shoulder_width:
        raise InvalidMeasurementsError(
            f"arm_span ({measurements.arm_span}) must exceed shoulder_width "
            f"({measurements.shoulder_width})"
        )


class SubjectMeasurements(BaseModel):
    """Anthropometric measurements of the simulated subject (defaults: reference subject)."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    mass: float = 62.2
    height: float = 1.68
    foot_size: float = 0.24
    arm_span: float = 1.63
    ankle_height: float = 0.08
    hip_height: float = 0.91
    hip_width: float = 0.25
    knee_height: float = 0.485
    shoulder_width: float = 0.354
    shoulder_height: float = 1.40

    @model_validator(mode="after")
    def _check_measurements(self) -> "SubjectMeasurements":
        validate_measurements(self)
        return self


class MassFractions(BaseModel):
    """Per-side segment mass fractions; the trunk receives whatever remains."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    foot: float = Field(0.0145, ge=0.0)
    shank: float = Field(0.0465, ge=0.0)
    thigh: float = Field(0.100, ge=0.0)
    trunk: float = Field(0.578, ge=0.0)
    upper_arm: float = Field(0.028, ge=0.0)
    forearm: float = Field(0.022, ge=0.0)

    def normalized(self) -> Dict[str, float]:
        """Return fractions scaled so both sides plus the trunk sum to one."""
        paired = self.foot + self.shank + self.thigh + self.upper_arm + self.forearm
        total = 2.0 * paired + self.trunk
        if total <= 0.0:
            raise ConfigError("mass fractions must not all be zero")
        return {name: getattr(self, name) / total for name in type(self).model_fields}


class JointSettings(BaseModel):
    """Anatomical range (rad) and torque limit (N·m) of one joint kind."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    lower: float
    upper: float
    torque_limit: float = Field(gt=0.0)

    @model_validator(mode="after")
    def _check_range(self) -> "JointSettings":
        if not self.lower < self.upper:
            raise ValueError(f"joint range lower {self.lower} must be below upper {self.upper}")
        return self


def _default_joints() -> Dict[str, JointSettings]:
    # Positive rotation moves a distal segment backwards; hip and shoulder flexion are negative.
    return {
        "ankle": JointSettings(lower=-0.6, upper=0.6, torque_limit=60.0),
        "knee": JointSettings(lower=-0.05, upper=2.2, torque_limit=100.0),
        "hip": JointSettings(lower=-1.6, upper=0.5, torque_limit=100.0),
        "shoulder": JointSettings(lower=-2.5, upper=1.0, torque_limit=50.0),
        "arm": JointSettings(lower=-2.4, upper=0.05, torque_limit=40.0),
    }


class ModelConfig(BaseModel):
    """Body, exoskeleton, crutch, contact and integrator parameters."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    subject: SubjectMeasurements = Field(default_factory=SubjectMeasurements)
    mass_fractions: MassFractions = Field(default_factory=MassFractions)
    exo_thigh_mass: float = Field(2.0, ge=0.0)
    exo_shank_mass: float = Field(2.0, ge=0.0)
    exo_trunk_mass: float = Field(3.0, ge=0.0)
    exo_trunk_offset: float = Field(0.1, ge=0.0)
    crutch_length: float = Field(0.9, gt=0.0)
    crutch_mass: float = Field(0.5, ge=0.0)
    upper_arm_ratio: float = Field(0.45, gt=0.0, lt=1.0)
    sole_forward_ratio: float = Field(0.25, ge=0.0, le=1.0)
    trunk_depth: float = Field(0.2, gt=0.0)
    thigh_radius: float = Field(0.07, gt=0.0)
    shank_radius: float = Field(0.05, gt=0.0)
    upper_arm_radius: float = Field(0.045, gt=0.0)
    forearm_radius: float = Field(0.035, gt=0.0)
    contact_radius: float = Field(0.02, gt=0.0)
    contact_stiffness: float = Field(1.0e4, gt=0.0)
    contact_damping: float = Field(100.0, ge=0.0)
    friction_coefficient: float = Field(0.8, ge=0.0)
    friction_velocity: float = Field(0.05, gt=0.0)
    limit_stiffness: float = Field(200.0, ge=0.0)
    limit_damping: float = Field(5.0, ge=0.0)
    gravity: float = Field(9.81, ge=0.0)
    timestep: float = Field(0.005, gt=0.0)
    substeps: int = Field(4, ge=1)
    joints: Dict[str, JointSettings] = Field(default_factory=_default_joints)

    @model_validator(mode="after")
    def _check_joint_kinds(self) -> "ModelConfig":
        missing = {"ankle", "knee", "hip", "shoulder", "arm"} - set(self.joints)
        if missing:
            raise ValueError(f"joint settings missing for: {sorted(missing)}")
        return self


class RewardConfig(BaseModel):
    """Constants and weights of every shaped reward term."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    c_walk: float = Field(5.0e5, ge=0.0)
    v_des: float = Field(0.25, gt=0.0)
    p_z_min: float = 0.65
    p_z_max: float = 3.0
    dont_fall_bonus: float = Field(5.0, ge=0.0)
    c_action: float = Field(1.0e-4, ge=0.0)
    orientation_target: float = Field(0.35, gt=0.0)
    orientation_gain: float = Field(8.0, ge=0.0)
    flat_contact_gain: float = Field(10.0, ge=0.0)
    w_crutch_reaction_force: float = Field(4.0e4, ge=0.0)
    crutch_cost_form: Literal["linear", "squared"] = "linear"
    hip_penalty: float = Field(2.0, ge=0.0)
    crutch_contact_threshold: float = Field(0.003, gt=0.0)
    crutch_contact_penalty: float = Field(2.0, ge=0.0)

    @model_validator(mode="after")
    def _check_height_band(self) -> "RewardConfig":
        if not self.p_z_min < self.p_z_max:
            raise ValueError(f"p_z_min {self.p_z_min} must be below p_z_max {self.p_z_max}")
        return self


class PpoConfig(BaseModel):
    """PPO hyperparameters and network shape."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    clip_epsilon: float = Field(0.2, gt=0.0, lt=1.0)
    epochs: int = Field(10, ge=1)
    minibatch_size: int = Field(64, ge=1)
    entropy_coef: float = Field(1.0e-3, ge=0.0)
    entropy_decay: float = Field(0.99, gt=0.0, le=1.0)
    gae_lambda: float = Field(0.95, gt=0.0, le=1.0)
    gamma: float = Field(0.99, gt=0.0, le=1.0)
    value_coef: float = Field(0.5, ge=0.0)
    learning_rate: float = Field(3.0e-4, ge=0.0)
    adam_beta1: float = Field(0.9, ge=0.0, lt=1.0)
    adam_beta2: float = Field(0.999, ge=0.0, lt=1.0)
    adam_eps: float = Field(1.0e-8, gt=0.0)
    rollout_length: int = Field(2000, ge=1)
    hidden_width: int = Field(200, ge=1)
    init_std: float = Field(1.0, gt=0.0)
    normalize_advantages: bool = True


class ExperimentSettings(BaseModel):
    """Run-level settings: environment choice, iteration budget, seeds and sweep grid."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    environment: Literal["crutch_walker", "point_mass"] = "crutch_walker"
    iterations: int = Field(8000, ge=1)
    seeds: List[int] = Field(default_factory=lambda: [0, 1, 2, 3, 4], min_length=1)
    agents: List[float] = Field(
        default_factory=lambda: [4.0e4, 3.0e4, 2.0e4, 1.0e4], min_length=1
    )
    include_baseline: bool = True
    episode_horizon: int = Field(2000, ge=1)
    eval_horizon: int = Field(2000, ge=1)
    eval_weight: float = Field(4.0e4, ge=0.0)
    reset_noise: float = Field(0.005, ge=0.0)
    normalize_observations: bool = True
    checkpoint_every: int = Field(100, ge=1)


class ExperimentConfig(BaseModel):
    """Complete experiment configuration document."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    model: ModelConfig = Field(default_factory=ModelConfig)
    reward: RewardConfig = Field(default_factory=RewardConfig)
    ppo: PpoConfig = Field(default_factory=PpoConfig)
    experiment: ExperimentSettings = Field(default_factory=ExperimentSettings)


def config_from_text(text: str, source: str = "<string>") -> ExperimentConfig:
    """
    Parse and validate a JSON experiment configuration.

    Args:
        text: JSON document with sections model, reward, ppo, experiment
        source: Name used in error messages

    Returns:
        Validated ExperimentConfig

    Raises:
        ConfigError: If the text is not JSON or fails validation
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"config {source} is not valid JSON: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"config {source} must be a JSON object")
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"config {source} is invalid: {e}") from e


def read_config_text(path: Union[str, Path]) -> str:
    """
    Read the exact text of a config file.

    Raises:
        ConfigError: If the file is missing or not UTF-8
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config not found: {path}")
    try:
        return path.read_bytes().decode("utf-8")
    except UnicodeDecodeError as e:
        raise ConfigError(f"config {path} is not UTF-8 text: {e}") from e


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    """
    Load an experiment configuration file.

    Raises:
        ConfigError: If the file is missing or invalid
    """
    config = config_from_text(read_config_text(path), source=str(path))
    logger.info(f"Loaded config {path} (environment={config.experiment.environment})")
    return config


def with_overrides(config: ExperimentConfig, **sections: Dict[str, Any]) -> ExperimentConfig:
    """
    Return a re-validated copy with per-section field overrides.

    Args:
        config: Base configuration
        **sections: Mapping of section name (model, reward, ppo, experiment) to
            field overrides; None values are ignored

    Raises:
        ConfigError: If a section is unknown or the result fails validation
    """
    data = config.model_dump()
    for section, updates in sections.items():
        if section not in data:
            raise ConfigError(f"unknown config section: {section}")
        data[section].update({k: v for k, v in updates.items() if v is not None})
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"config override is invalid: {e}") from e
