"""Shared models, configuration, errors and messaging."""

from crutchgait.shared.config import (
    ExperimentConfig,
    ExperimentSettings,
    ModelConfig,
    PpoConfig,
    RewardConfig,
    SubjectMeasurements,
    config_from_text,
    load_config,
    read_config_text,
    with_overrides,
)
from crutchgait.shared.errors import (
    CheckpointError,
    ConfigError,
    CrutchGaitError,
    InvalidMeasurementsError,
    NonFiniteLossError,
    SimulationDivergedError,
    TrainingDivergedError,
)
from crutchgait.shared.message_bus import (
    SWEEP_TOPIC,
    TRAINING_TOPIC,
    EventType,
    InMemoryMessageBus,
    Message,
    MessageBus,
)
from crutchgait.shared.models import (
    MetricsReport,
    RewardBreakdown,
    RewardInputs,
    RunManifest,
    SimState,
    StepResult,
    TerminationCause,
    UpdateStats,
)

__all__ = [
    "ExperimentConfig",
    "ExperimentSettings",
    "ModelConfig",
    "PpoConfig",
    "RewardConfig",
    "SubjectMeasurements",
    "config_from_text",
    "load_config",
    "read_config_text",
    "with_overrides",
    "CheckpointError",
    "ConfigError",
    "CrutchGaitError",
    "InvalidMeasurementsError",
    "NonFiniteLossError",
    "SimulationDivergedError",
    "TrainingDivergedError",
    "SWEEP_TOPIC",
    "TRAINING_TOPIC",
    "EventType",
    "InMemoryMessageBus",
    "Message",
    "MessageBus",
    "MetricsReport",
    "RewardBreakdown",
    "RewardInputs",
    "RunManifest",
    "SimState",
    "StepResult",
    "TerminationCause",
    "UpdateStats",
]
