"""Exception hierarchy shared by all crutchgait packages."""


class CrutchGaitError(Exception):
    """Base class for every error raised by crutchgait."""


class InvalidMeasurementsError(CrutchGaitError, ValueError):
    """Subject measurements are non-positive or out of anatomical order."""


class ConfigError(CrutchGaitError, ValueError):
    """Experiment configuration is missing, unparsable or invalid."""


class SimulationDivergedError(CrutchGaitError, ArithmeticError):
    """A dynamics step produced a non-finite state."""


class NonFiniteLossError(CrutchGaitError, ArithmeticError):
    """A PPO loss or gradient became non-finite."""


class TrainingDivergedError(CrutchGaitError):
    """Training was aborted because the learner diverged."""


class CheckpointError(CrutchGaitError):
    """Checkpoint file is unreadable or its shape header does not match its arrays."""
