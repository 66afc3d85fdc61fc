"""Learning agents: networks, checkpoints and the PPO learner."""

from crutchgait.agents.checkpoint import PolicyCheckpoint, load_checkpoint, save_checkpoint
from crutchgait.agents.nn import Adam, MlpParams, init_actor, init_critic
from crutchgait.agents.ppo import PpoAgent, RolloutBuffer, collect_rollout, compute_gae

__all__ = [
    "PolicyCheckpoint",
    "load_checkpoint",
    "save_checkpoint",
    "Adam",
    "MlpParams",
    "init_actor",
    "init_critic",
    "PpoAgent",
    "RolloutBuffer",
    "collect_rollout",
    "compute_gae",
]
