"""Simulation engines: body model, dynamics, rewards and environments."""

from crutchgait.engines.base_env import LocomotionEnv, RunningMeanStd
from crutchgait.engines.dynamics import TrajectoryRecorder, initial_state, step
from crutchgait.engines.env import CrutchWalkEnv, ObservationLayout
from crutchgait.engines.model import RobotModel, build_subject_model, nominal_pose
from crutchgait.engines.point_mass import PointMassEnv
from crutchgait.engines.rewards import crutch_cost, total_reward

__all__ = [
    "LocomotionEnv",
    "RunningMeanStd",
    "TrajectoryRecorder",
    "initial_state",
    "step",
    "CrutchWalkEnv",
    "ObservationLayout",
    "RobotModel",
    "build_subject_model",
    "nominal_pose",
    "PointMassEnv",
    "crutch_cost",
    "total_reward",
]
