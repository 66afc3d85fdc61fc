"""Training runs, deterministic evaluation and evaluation metrics."""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
import pandas as pd

from crutchgait.agents.checkpoint import PolicyCheckpoint, checkpoint_name, save_checkpoint
from crutchgait.agents.ppo import PpoAgent, collect_rollout
from crutchgait.engines.base_env import LocomotionEnv, RunningMeanStd
from crutchgait.engines.dynamics import TrajectoryRecorder
from crutchgait.engines.env import CrutchWalkEnv
from crutchgait.engines.model import build_subject_model
from crutchgait.engines.point_mass import PointMassEnv
from crutchgait.engines.rewards import crutch_cost
from crutchgait.shared.config import ExperimentConfig, RewardConfig
from crutchgait.shared.errors import ConfigError, NonFiniteLossError, TrainingDivergedError
from crutchgait.shared.message_bus import (
    TRAINING_TOPIC,
    EventType,
    InMemoryMessageBus,
    Message,
    MessageBus,
    make_message,
)
from crutchgait.shared.models import MetricsReport, TerminationCause


logger = logging.getLogger(__name__)

LOG_COLUMNS = [
    "iter", "cum_reward", "mean_ratio", "clip_frac", "entropy",
    "actor_loss", "critic_loss", "entropy_coef",
]
METRIC_COLUMNS = ["mean_crutch_cost", "mape_velocity", "mape_orientation", "mean_abs_lat_disp"]
CSV_FLOAT_FORMAT = "%.12g"


def write_csv(frame: pd.DataFrame, path: Union[str, Path]) -> Path:
    """Write a frame with a locale-independent numeric format."""
    path = Path(path)
    frame.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT)
    return path


class TrainingLogRecorder:
    """Subscriber that turns ``train.iteration`` events into training-log rows."""

    def __init__(self) -> None:
        self.rows: List[Dict[str, Any]] = []

    def handle(self, message: Message) -> None:
        if message.event_type == EventType.TRAIN_ITERATION.value:
            self.rows.append({column: message.payload[column] for column in LOG_COLUMNS})

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows, columns=LOG_COLUMNS)

    def write_csv(self, path: Union[str, Path]) -> Path:
        return write_csv(self.to_frame(), path)


@dataclass
class TrainingResult:
    """Outcome of one training run."""
    checkpoint: PolicyCheckpoint
    log: pd.DataFrame
    run_dir: Optional[Path]


@dataclass
class EvaluationResult:
    """Outcome of one deterministic evaluation rollout."""
    report: MetricsReport
    trajectory: pd.DataFrame
    recorder: Optional[TrajectoryRecorder]


def make_env(
    cfg: ExperimentConfig,
    seed: Optional[int] = None,
    normalizer: Optional[RunningMeanStd] = None,
    horizon: Optional[int] = None,
) -> LocomotionEnv:
    """
    Build the environment named by the experiment settings.

    Args:
        cfg: Experiment configuration
        seed: Seed of the environment's noise stream
        normalizer: Observation normalizer to attach
        horizon: Episode horizon (defaults to experiment.episode_horizon)
    """
    settings = cfg.experiment
    horizon = horizon or settings.episode_horizon
    if settings.environment == "point_mass":
        return PointMassEnv(
            horizon=horizon, reward_cfg=cfg.reward, normalizer=normalizer, seed=seed
        )
    model = build_subject_model(cfg.model.subject, cfg.model)
    return CrutchWalkEnv(
        model,
        reward_cfg=cfg.reward,
        horizon=horizon,
        timestep=cfg.model.timestep,
        substeps=cfg.model.substeps,
        reset_noise=settings.reset_noise,
        normalizer=normalizer,
        seed=seed,
    )


def moving_average(series: Any, window: int = 100) -> np.ndarray:
    """Trailing mean over min(window, index + 1) samples."""
    if window < 1:
        raise ValueError(f"window must be at least 1, got {window}")
    values = pd.Series(np.asarray(series, dtype=float))
    return values.rolling(window, min_periods=1).mean().to_numpy()


def train(
    cfg: ExperimentConfig,
    seed: int,
    out_dir: Optional[Union[str, Path]] = None,
    bus: Optional[MessageBus] = None,
) -> TrainingResult:
    """
    Run the collect-rollout/update loop for the configured number of iterations.

    Args:
        cfg: Experiment configuration
        seed: Run seed; every random stream is derived from it
        out_dir: Directory for train_log.csv and checkpoints (nothing written if None)
        bus: Message bus receiving progress events

    Returns:
        TrainingResult with the final checkpoint and the training log

    Raises:
        ConfigError: If the iteration budget is not positive
        TrainingDivergedError: If the learner produced non-finite values
    """
    iterations = cfg.experiment.iterations
    if iterations < 1:
        raise ConfigError(f"iterations must be at least 1, got {iterations}")
    run_dir = Path(out_dir) if out_dir is not None else None
    if run_dir is not None:
        run_dir.mkdir(parents=True, exist_ok=True)

    own_bus = bus is None
    bus = bus or InMemoryMessageBus()
    recorder = TrainingLogRecorder()
    bus.subscribe(TRAINING_TOPIC, recorder.handle)
    try:
        source = f"train-seed{seed}"

        init_seq, env_seq, action_seq, shuffle_seq = np.random.SeedSequence(seed).spawn(4)
        env_seed = int(env_seq.generate_state(1)[0])
        action_rng = np.random.default_rng(action_seq)
        shuffle_rng = np.random.default_rng(shuffle_seq)

        env = make_env(cfg, seed=env_seed)
        normalizer = None
        if cfg.experiment.normalize_observations:
            normalizer = RunningMeanStd((env.observation_size,))
            env.normalizer = normalizer
        agent = PpoAgent(
            env.observation_size, env.action_size, cfg.ppo, rng=np.random.default_rng(init_seq)
        )
        logger.info(
            f"Training {cfg.experiment.environment} seed {seed} for {iterations} iterations "
            f"(rollout {cfg.ppo.rollout_length})"
        )
        bus.publish(TRAINING_TOPIC, make_message(
            EventType.RUN_STARTED, {"seed": seed, "iterations": iterations}, source
        ))

        def snapshot(iteration: int) -> PolicyCheckpoint:
            return agent.to_checkpoint(
                iteration,
                normalizer=normalizer.state_dict() if normalizer is not None else None,
                metadata={"seed": seed, "environment": cfg.experiment.environment},
            )

        observation = None
        for iteration in range(1, iterations + 1):
            try:
                buffer, summary, observation = collect_rollout(
                    env, agent, cfg.ppo.rollout_length, action_rng, observation
                )
                stats = agent.update(buffer, shuffle_rng)
            except NonFiniteLossError as e:
                logger.error(f"Training seed {seed} diverged at iteration {iteration}: {e}")
                raise TrainingDivergedError(
                    f"training diverged at iteration {iteration}: {e}"
                ) from e
            if not np.isfinite(summary.cum_reward):
                raise TrainingDivergedError(f"non-finite return at iteration {iteration}")

            row = {
                "iter": iteration,
                "cum_reward": summary.cum_reward,
                "mean_ratio": stats.mean_ratio,
                "clip_frac": stats.clip_fraction,
                "entropy": stats.entropy,
                "actor_loss": stats.actor_loss,
                "critic_loss": stats.critic_loss,
                "entropy_coef": stats.entropy_coef,
            }
            bus.publish(TRAINING_TOPIC, make_message(EventType.TRAIN_ITERATION, row, source))
            logger.debug(f"Iteration {iteration}: cum_reward {summary.cum_reward:.4f}")

            if run_dir is not None and iteration % cfg.experiment.checkpoint_every == 0:
                path = save_checkpoint(snapshot(iteration), run_dir / checkpoint_name(iteration))
                recorder.write_csv(run_dir / "train_log.csv")
                bus.publish(TRAINING_TOPIC, make_message(
                    EventType.CHECKPOINT_WRITTEN,
                    {"iteration": iteration, "path": str(path)},
                    source,
                ))

        final = snapshot(iterations)
        if run_dir is not None:
            if iterations % cfg.experiment.checkpoint_every:
                save_checkpoint(final, run_dir / checkpoint_name(iterations))
            recorder.write_csv(run_dir / "train_log.csv")
        bus.publish(TRAINING_TOPIC, make_message(
            EventType.RUN_FINISHED, {"seed": seed, "iterations": iterations}, source
        ))
    finally:
        bus.unsubscribe(TRAINING_TOPIC, recorder.handle)
        if own_bus:
            bus.close()
    log = recorder.to_frame()
    logger.info(f"Finished seed {seed}: final cum_reward {log['cum_reward'].iloc[-1]:.4f}")
    return TrainingResult(checkpoint=final, log=log, run_dir=run_dir)


def compute_metrics(
    trajectory: pd.DataFrame,
    reward_cfg: RewardConfig,
    eval_weight: float,
    termination_cause: Optional[TerminationCause] = None,
    horizon: Optional[int] = None,
) -> MetricsReport:
    """
    Evaluation metrics over the realized steps of a trajectory.

    Args:
        trajectory: Per-step rows with com_velocity_x, pitch, lateral_position,
            d_crutch_r and d_crutch_l
        reward_cfg: Supplies the velocity and orientation targets and the cost form
        eval_weight: Common crutch-cost weight used for every evaluated agent
        termination_cause: How the rollout ended
        horizon: Planned number of steps

    Returns:
        MetricsReport
    """
    if trajectory.empty:
        raise ValueError("cannot compute metrics of an empty trajectory")
    d_r = trajectory["d_crutch_r"].to_numpy(dtype=float)
    d_l = trajectory["d_crutch_l"].to_numpy(dtype=float)
    velocity = trajectory["com_velocity_x"].to_numpy(dtype=float)
    pitch = trajectory["pitch"].to_numpy(dtype=float)
    lateral = trajectory["lateral_position"].to_numpy(dtype=float)

    costs = crutch_cost(d_r, d_l, eval_weight, reward_cfg.crutch_cost_form)
    steps = len(trajectory)
    return MetricsReport(
        mean_crutch_cost=float(np.mean(costs)),
        mape_velocity=float(np.mean(np.abs(velocity - reward_cfg.v_des)) / reward_cfg.v_des * 100.0),
        mape_orientation=float(
            np.mean(np.abs(pitch - reward_cfg.orientation_target))
            / reward_cfg.orientation_target * 100.0
        ),
        mean_abs_lateral_displacement=float(np.mean(np.abs(lateral))),
        steps=steps,
        terminated_early=horizon is not None and steps < horizon,
        termination_cause=termination_cause,
    )


def evaluate(
    checkpoint: PolicyCheckpoint,
    cfg: ExperimentConfig,
    seed: Optional[int] = None,
) -> EvaluationResult:
    """
    Deterministic rollout of the policy mean with frozen normalization.

    Args:
        checkpoint: Policy to evaluate
        cfg: Experiment configuration (eval horizon and eval weight)
        seed: Seed of the reset noise (defaults to the first configured seed)

    Returns:
        EvaluationResult with metrics over the realized steps
    """
    settings = cfg.experiment
    normalizer = (
        RunningMeanStd.from_state_dict(checkpoint.normalizer, frozen=True)
        if checkpoint.normalizer is not None
        else None
    )
    seed = settings.seeds[0] if seed is None else seed
    env = make_env(cfg, seed=seed, normalizer=normalizer, horizon=settings.eval_horizon)
    agent = PpoAgent.from_checkpoint(checkpoint, cfg.ppo)
    if agent.obs_dim != env.observation_size or agent.act_dim != env.action_size:
        raise ValueError(
            f"checkpoint expects {agent.obs_dim} observations/{agent.act_dim} actions, "
            f"environment has {env.observation_size}/{env.action_size}"
        )

    recorder = TrajectoryRecorder(env.model) if isinstance(env, CrutchWalkEnv) else None
    observation = env.reset(seed=seed)
    rows = []
    cause = None
    for _ in range(settings.eval_horizon):
        result = env.step(agent.act_deterministic(observation))
        rows.append(result.info)
        if recorder is not None:
            recorder.record(env.state)
        observation = result.observation
        if result.done:
            cause = result.cause
            break
    trajectory = pd.DataFrame(rows)
    report = compute_metrics(
        trajectory, cfg.reward, settings.eval_weight,
        termination_cause=cause, horizon=settings.eval_horizon,
    )
    logger.info(
        f"Evaluated iteration {checkpoint.iteration}: {report.steps} steps, "
        f"crutch cost {report.mean_crutch_cost:.4f}, velocity MAPE {report.mape_velocity:.1f}%"
    )
    return EvaluationResult(report=report, trajectory=trajectory, recorder=recorder)
