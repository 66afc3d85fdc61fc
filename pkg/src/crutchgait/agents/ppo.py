"""PPO learner: rollout storage, advantage estimation, clipped objective and updates."""

import logging
from dataclasses import dataclass
from typing import Any, Dict, Optional, Tuple

import numpy as np

from crutchgait.agents.checkpoint import PolicyCheckpoint
from crutchgait.agents.nn import (
    Adam,
    GaussianPolicyOutput,
    MlpParams,
    init_actor,
    init_critic,
    log_prob,
    mlp_backward,
    mlp_forward,
    policy_entropy,
    policy_sample,
    split_gaussian,
)
from crutchgait.engines.base_env import LocomotionEnv
from crutchgait.shared.config import PpoConfig
from crutchgait.shared.errors import NonFiniteLossError
from crutchgait.shared.models import UpdateStats


logger = logging.getLogger(__name__)

ADVANTAGE_EPS = 1e-8


class RolloutBuffer:
    """Fixed-capacity storage of one rollout."""

    def __init__(self, capacity: int, obs_dim: int, act_dim: int):
        if capacity < 1:
            raise ValueError(f"rollout capacity must be at least 1, got {capacity}")
        self.capacity = capacity
        self.observations = np.zeros((capacity, obs_dim))
        self.actions = np.zeros((capacity, act_dim))
        self.log_probs = np.zeros(capacity)
        self.values = np.zeros(capacity)
        self.rewards = np.zeros(capacity)
        self.dones = np.zeros(capacity, dtype=bool)
        self.bootstrap_value = 0.0
        self.size = 0

    @property
    def full(self) -> bool:
        return self.size == self.capacity

    def add(
        self,
        observation: np.ndarray,
        action: np.ndarray,
        log_prob_old: float,
        value: float,
        reward: float,
        done: bool,
    ) -> None:
        if self.full:
            raise IndexError("rollout buffer is full")
        if not np.isfinite(log_prob_old):
            raise ValueError("log probability must be finite")
        i = self.size
        self.observations[i] = observation
        self.actions[i] = action
        self.log_probs[i] = log_prob_old
        self.values[i] = value
        self.rewards[i] = reward
        self.dones[i] = done
        self.size += 1


@dataclass(frozen=True)
class RolloutSummary:
    """Undiscounted returns of the episode segments in one rollout."""
    cum_reward: float
    episodes: int
    steps: int
    total_reward: float


def compute_gae(
    rewards: np.ndarray,
    values: np.ndarray,
    dones: np.ndarray,
    bootstrap_value: float,
    gamma: float,
    lam: float,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Generalized advantage estimates and value targets.

    Args:
        rewards: r_t
        values: V(s_t)
        dones: Episode ended after step t
        bootstrap_value: V of the state following the last step
        gamma: Discount
        lam: GAE lambda

    Returns:
        (advantages, returns) with returns = advantages + values
    """
    rewards = np.asarray(rewards, dtype=float)
    values = np.asarray(values, dtype=float)
    dones = np.asarray(dones, dtype=bool)
    if not (rewards.shape == values.shape == dones.shape):
        raise ValueError("rewards, values and dones must have equal length")
    steps = rewards.shape[0]
    advantages = np.zeros(steps)
    running = 0.0
    for t in reversed(range(steps)):
        next_value = bootstrap_value if t == steps - 1 else values[t + 1]
        live = 0.0 if dones[t] else 1.0
        delta = rewards[t] + gamma * next_value * live - values[t]
        running = delta + gamma * lam * live * running
        advantages[t] = running
    return advantages, advantages + values


def normalize_advantages(advantages: np.ndarray) -> np.ndarray:
    """Shift to zero mean and scale to unit variance."""
    advantages = np.asarray(advantages, dtype=float)
    centered = advantages - advantages.mean()
    return centered / (centered.std() + ADVANTAGE_EPS)


def prob_ratio(log_prob_new: np.ndarray, log_prob_old: np.ndarray) -> np.ndarray:
    return np.exp(np.asarray(log_prob_new) - np.asarray(log_prob_old))


def clipped_surrogate(ratio: np.ndarray, advantage: np.ndarray, epsilon: float) -> np.ndarray:
    """Per-sample min(r·A, clip(r, 1-ε, 1+ε)·A)."""
    ratio = np.asarray(ratio, dtype=float)
    advantage = np.asarray(advantage, dtype=float)
    return np.minimum(ratio * advantage, np.clip(ratio, 1.0 - epsilon, 1.0 + epsilon) * advantage)


def clip_fraction(ratio: np.ndarray, epsilon: float) -> float:
    """Share of samples whose ratio lies outside the trust region [1-ε, 1+ε]."""
    ratio = np.asarray(ratio, dtype=float)
    if ratio.size == 0:
        return 0.0
    return float(np.mean(np.abs(ratio - 1.0) > epsilon))


def critic_loss(predicted: np.ndarray, targets: np.ndarray) -> float:
    diff = np.asarray(predicted, dtype=float) - np.asarray(targets, dtype=float)
    return float(np.mean(diff**2))


def total_loss(
    surrogate: float, critic: float, entropy: float, value_coef: float, entropy_coef: float
) -> float:
    """Loss to minimize: the negated entropy-regularized actor-critic objective."""
    return -(surrogate - value_coef * critic + entropy_coef * entropy)


def actor_objective(
    pol: GaussianPolicyOutput,
    actions: np.ndarray,
    log_prob_old: np.ndarray,
    advantage: np.ndarray,
    epsilon: float,
    entropy_coef: float,
) -> float:
    """Actor loss of a minibatch: negated mean clipped surrogate plus entropy bonus."""
    ratio = prob_ratio(log_prob(pol, actions), log_prob_old)
    surrogate = clipped_surrogate(ratio, advantage, epsilon)
    return -(float(surrogate.mean()) + entropy_coef * float(policy_entropy(pol.std).mean()))


def actor_output_gradient(
    pol: GaussianPolicyOutput,
    actions: np.ndarray,
    ratio: np.ndarray,
    advantage: np.ndarray,
    epsilon: float,
    entropy_coef: float,
) -> np.ndarray:
    """
    Gradient of ``actor_objective`` with respect to the gaussian head output.

    Returns:
        Array of shape (batch, 2·act_dim): mean gradients then std gradients
    """
    batch = ratio.shape[0]
    # the surrogate only passes gradient where the unclipped branch is the minimum
    unclipped = ratio * advantage
    active = unclipped <= np.clip(ratio, 1.0 - epsilon, 1.0 + epsilon) * advantage
    d_logp = np.where(active, unclipped, 0.0)
    diff = actions - pol.mean
    var = pol.std**2
    grad_mean = -(d_logp[:, None] * diff / var) / batch
    grad_std = -(
        d_logp[:, None] * (diff**2 / (var * pol.std) - 1.0 / pol.std)
        + entropy_coef / pol.std
    ) / batch
    return np.concatenate([grad_mean, grad_std], axis=1)


class PpoAgent:
    """Separate actor and critic networks, each with its own Adam optimizer."""

    def __init__(
        self,
        obs_dim: int,
        act_dim: int,
        cfg: PpoConfig,
        rng: Optional[np.random.Generator] = None,
        actor: Optional[MlpParams] = None,
        critic: Optional[MlpParams] = None,
    ):
        rng = rng if rng is not None else np.random.default_rng()
        self.cfg = cfg
        self.obs_dim = obs_dim
        self.act_dim = act_dim
        self.actor = actor or init_actor(obs_dim, act_dim, cfg.hidden_width, rng, cfg.init_std)
        self.critic = critic or init_critic(obs_dim, cfg.hidden_width, rng)
        self.actor_optimizer = self._optimizer(self.actor)
        self.critic_optimizer = self._optimizer(self.critic)
        self.entropy_coef = cfg.entropy_coef
        self.updates = 0

    def _optimizer(self, params: MlpParams) -> Adam:
        return Adam(
            params.parameters(),
            learning_rate=self.cfg.learning_rate,
            beta1=self.cfg.adam_beta1,
            beta2=self.cfg.adam_beta2,
            eps=self.cfg.adam_eps,
        )

    @classmethod
    def from_checkpoint(cls, checkpoint: PolicyCheckpoint, cfg: PpoConfig) -> "PpoAgent":
        obs_dim = checkpoint.actor.widths[0]
        act_dim = checkpoint.actor.widths[-1] // 2
        agent = cls(obs_dim, act_dim, cfg, actor=checkpoint.actor, critic=checkpoint.critic)
        agent.entropy_coef = checkpoint.entropy_coef
        return agent

    def to_checkpoint(
        self,
        iteration: int,
        normalizer: Optional[Dict[str, np.ndarray]] = None,
        metadata: Optional[Dict[str, Any]] = None,
    ) -> PolicyCheckpoint:
        return PolicyCheckpoint(
            actor=self.actor.copy(),
            critic=self.critic.copy(),
            iteration=iteration,
            normalizer=normalizer,
            entropy_coef=self.entropy_coef,
            metadata=dict(metadata or {}),
        )

    def policy(self, observation: np.ndarray) -> GaussianPolicyOutput:
        output, _ = mlp_forward(self.actor, observation)
        return split_gaussian(output)

    def value(self, observation: np.ndarray) -> np.ndarray:
        output, _ = mlp_forward(self.critic, observation)
        return output[..., 0]

    def act(
        self, observation: np.ndarray, rng: np.random.Generator
    ) -> Tuple[np.ndarray, float, float]:
        """Sample an action; returns (action, log_prob, value)."""
        action, logp = policy_sample(self.policy(observation), rng)
        return action, float(logp), float(self.value(observation))

    def act_deterministic(self, observation: np.ndarray) -> np.ndarray:
        return self.policy(observation).mean

    def update(self, buffer: RolloutBuffer, rng: np.random.Generator) -> UpdateStats:
        """
        Run the epoch/minibatch PPO update on a full rollout.

        Args:
            buffer: Full rollout buffer
            rng: Generator for minibatch shuffling

        Returns:
            UpdateStats averaged over all minibatches

        Raises:
            ValueError: If the buffer is not full
            NonFiniteLossError: If a loss or gradient becomes non-finite
        """
        if not buffer.full:
            raise ValueError(f"buffer holds {buffer.size} of {buffer.capacity} steps")
        cfg = self.cfg
        n = buffer.size
        advantages, returns = compute_gae(
            buffer.rewards, buffer.values, buffer.dones, buffer.bootstrap_value,
            cfg.gamma, cfg.gae_lambda,
        )
        if cfg.normalize_advantages and n > 1:
            advantages = normalize_advantages(advantages)

        coef = self.entropy_coef
        eps = cfg.clip_epsilon
        totals = np.zeros(5)
        initial_ratio = float("nan")
        minibatches = 0
        for _ in range(cfg.epochs):
            order = rng.permutation(n)
            for start in range(0, n, cfg.minibatch_size):
                idx = order[start:start + cfg.minibatch_size]
                batch = len(idx)
                obs = buffer.observations[idx]
                actions = buffer.actions[idx]
                adv = advantages[idx]
                targets = returns[idx]

                out, actor_cache = mlp_forward(self.actor, obs)
                pol = split_gaussian(out)
                ratio = prob_ratio(log_prob(pol, actions), buffer.log_probs[idx])
                surrogate = clipped_surrogate(ratio, adv, eps)
                entropy = policy_entropy(pol.std)
                values, critic_cache = mlp_forward(self.critic, obs)
                values = values[:, 0]
                c_loss = critic_loss(values, targets)
                a_loss = -(float(surrogate.mean()) + coef * float(entropy.mean()))
                loss = total_loss(float(surrogate.mean()), c_loss, float(entropy.mean()),
                                  cfg.value_coef, coef)
                if not np.isfinite(loss):
                    raise NonFiniteLossError(f"non-finite PPO loss after {self.updates} updates")
                if minibatches == 0:
                    initial_ratio = float(ratio.mean())

                actor_grads = mlp_backward(
                    self.actor, actor_cache,
                    actor_output_gradient(pol, actions, ratio, adv, eps, coef),
                )
                grad_value = 2.0 * cfg.value_coef * (values - targets) / batch
                critic_grads = mlp_backward(self.critic, critic_cache, grad_value[:, None])

                grads = actor_grads.parameters() + critic_grads.parameters()
                if not all(np.all(np.isfinite(g)) for g in grads):
                    raise NonFiniteLossError(f"non-finite PPO gradient after {self.updates} updates")
                self.actor_optimizer.step(self.actor.parameters(), actor_grads.parameters())
                self.critic_optimizer.step(self.critic.parameters(), critic_grads.parameters())

                clipped = clip_fraction(ratio, eps)
                totals += (a_loss, c_loss, float(entropy.mean()), float(ratio.mean()), clipped)
                minibatches += 1

        self.entropy_coef = coef * cfg.entropy_decay
        self.updates += 1
        means = totals / minibatches
        stats = UpdateStats(
            actor_loss=float(means[0]),
            critic_loss=float(means[1]),
            entropy=float(means[2]),
            mean_ratio=float(means[3]),
            clip_fraction=float(means[4]),
            entropy_coef=coef,
            initial_ratio=initial_ratio,
            minibatches=minibatches,
        )
        logger.debug(
            f"PPO update {self.updates}: actor {stats.actor_loss:.4f}, "
            f"critic {stats.critic_loss:.4f}, clip {stats.clip_fraction:.3f}"
        )
        return stats


def collect_rollout(
    env: LocomotionEnv,
    agent: PpoAgent,
    length: int,
    rng: np.random.Generator,
    observation: Optional[np.ndarray] = None,
) -> Tuple[RolloutBuffer, RolloutSummary, np.ndarray]:
    """
    Fill a rollout buffer with sampled actions, resetting on episode end.

    Args:
        env: Environment to step
        agent: Policy and value function
        length: Number of control steps
        rng: Generator for action sampling
        observation: Observation to continue from; the env is reset when None

    Returns:
        (buffer, summary, observation to continue from)
    """
    obs = env.reset() if observation is None else observation
    buffer = RolloutBuffer(length, env.observation_size, env.action_size)
    finished = []
    episode_return = 0.0
    total = 0.0
    for _ in range(length):
        action, logp, value = agent.act(obs, rng)
        result = env.step(action)
        buffer.add(obs, action, logp, value, result.reward, result.done)
        episode_return += result.reward
        total += result.reward
        if result.done:
            finished.append(episode_return)
            episode_return = 0.0
            obs = env.reset()
        else:
            obs = result.observation
    segments = finished if buffer.dones[-1] else finished + [episode_return]
    buffer.bootstrap_value = 0.0 if buffer.dones[-1] else float(agent.value(obs))
    summary = RolloutSummary(
        cum_reward=float(np.mean(segments)),
        episodes=len(finished),
        steps=length,
        total_reward=total,
    )
    return buffer, summary, obs
