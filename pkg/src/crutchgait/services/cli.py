"""
Command-line entry point.

Commands:
    train   train one policy and write train_log.csv, checkpoints and a manifest
    sweep   train and evaluate every (agent weight, seed) cell
    eval    evaluate a checkpoint deterministically
    plot    draw smoothed learning curves of one or more training logs

Exit codes: 0 success, 2 usage or config error, 3 data error.
"""

import argparse
import hashlib
import logging
import os
import sys
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import pandas as pd

from crutchgait.agents.checkpoint import load_checkpoint
from crutchgait.engines.model import build_subject_model, format_parameter_table
from crutchgait.services.harness import evaluate, train, write_csv
from crutchgait.services.plotting import plot_learning_curves, read_logs
from crutchgait.services.sweep_workflow import sweep
from crutchgait.shared.config import (
    ExperimentConfig,
    config_from_text,
    read_config_text,
    with_overrides,
)
from crutchgait.shared.errors import (
    CheckpointError,
    ConfigError,
    SimulationDivergedError,
    TrainingDivergedError,
)
from crutchgait.shared.models import RunManifest


logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
OUT_ENV = "CRUTCHGAIT_OUT"


def default_out_root() -> Path:
    return Path(os.environ.get(OUT_ENV, "runs"))


def content_hash(data: bytes) -> str:
    """Git blob hash of a file's bytes."""
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def read_config(path: str) -> Tuple[ExperimentConfig, str]:
    """
    Read a config file, returning the parsed config and its exact text.

    Raises:
        ConfigError: If the file is missing or invalid
    """
    text = read_config_text(path)
    return config_from_text(text, source=path), text


def write_manifest(
    out_dir: Path,
    command: str,
    snapshot: str,
    seed: Optional[int],
    started_at: datetime,
    overrides: Dict[str, Any],
    artifacts: Dict[str, str],
) -> Path:
    manifest = RunManifest(
        command=command,
        config_snapshot=snapshot,
        config_hash=content_hash(snapshot.encode("utf-8")),
        seed=seed,
        started_at=started_at,
        overrides={k: v for k, v in overrides.items() if v is not None},
        artifacts=artifacts,
    )
    path = out_dir / "manifest.yaml"
    path.write_text(manifest.to_yaml(), encoding="utf-8")
    return path


def _fail(code: int, message: str) -> int:
    logger.error(message)
    print(f"error: {message}", file=sys.stderr)
    return code


def cmd_train(args: argparse.Namespace) -> int:
    started = datetime.now()
    config, snapshot = read_config(args.config)
    config = with_overrides(config, experiment={"iterations": args.iterations})
    seed = args.seed if args.seed is not None else config.experiment.seeds[0]
    out_dir = Path(args.out) if args.out else default_out_root() / f"train_seed{seed}"
    out_dir.mkdir(parents=True, exist_ok=True)

    result = train(config, seed, out_dir=out_dir)
    artifacts = {"train_log": str(out_dir / "train_log.csv")}
    if config.experiment.environment == "crutch_walker":
        table = out_dir / "model_parameters.txt"
        model = build_subject_model(config.model.subject, config.model)
        table.write_text(format_parameter_table(model), encoding="utf-8")
        artifacts["model_parameters"] = str(table)
    artifacts["checkpoints"] = str(out_dir)
    write_manifest(
        out_dir, "train", snapshot, seed, started,
        {"iterations": args.iterations, "seed": args.seed}, artifacts,
    )
    print(f"trained {len(result.log)} iterations -> {out_dir}")
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    started = datetime.now()
    config, snapshot = read_config(args.config)
    config = with_overrides(config, experiment={"iterations": args.iterations})
    out_dir = Path(args.out) if args.out else default_out_root() / "sweep"
    out_dir.mkdir(parents=True, exist_ok=True)
    result = sweep(config, out_dir=out_dir, parallel=args.parallel)
    write_manifest(
        out_dir, "sweep", snapshot, None, started,
        {"iterations": args.iterations, "parallel": args.parallel}, result.artifacts,
    )
    print(result.table.to_string(index=False))
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    started = datetime.now()
    config, snapshot = read_config(args.config)
    checkpoint = load_checkpoint(args.checkpoint)
    seed = args.seed if args.seed is not None else config.experiment.seeds[0]
    out_dir = Path(args.out) if args.out else Path(args.checkpoint).parent / "eval"
    out_dir.mkdir(parents=True, exist_ok=True)

    evaluation = evaluate(checkpoint, config, seed=seed)
    metrics_path = write_csv(pd.DataFrame([evaluation.report.to_row()]), out_dir / "eval_metrics.csv")
    trajectory_path = out_dir / "trajectory.csv"
    if evaluation.recorder is not None:
        evaluation.recorder.write_csv(trajectory_path)
    else:
        write_csv(evaluation.trajectory, trajectory_path)
    write_manifest(
        out_dir, "eval", snapshot, seed, started, {"checkpoint": str(args.checkpoint)},
        {"eval_metrics": str(metrics_path), "trajectory": str(trajectory_path)},
    )
    print(pd.DataFrame([evaluation.report.to_row()]).to_string(index=False))
    return EXIT_OK


def cmd_plot(args: argparse.Namespace) -> int:
    missing = [path for path in args.logs if not Path(path).is_file()]
    if missing:
        return _fail(EXIT_USAGE, f"training log not found: {missing[0]}")
    if args.window < 1:
        return _fail(EXIT_USAGE, f"--window must be at least 1, got {args.window}")
    out_path = Path(args.out) if args.out else default_out_root() / "learning_curves.svg"
    out_path.parent.mkdir(parents=True, exist_ok=True)
    plot_learning_curves(read_logs(args.logs), out_path, window=args.window)
    print(f"wrote {out_path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crutchgait",
        description="Human-exoskeleton crutch walking: PPO training, sweeps and evaluation",
    )
    parser.add_argument(
        "--log-level", default="INFO",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"], help="Logging verbosity",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    p = commands.add_parser("train", help="Train one policy")
    p.add_argument("config", help="Experiment config (JSON)")
    p.add_argument("--seed", type=int, default=None, help="Run seed (default: first config seed)")
    p.add_argument("--iterations", type=int, default=None, help="Override experiment.iterations")
    p.add_argument("--out", default=None, help=f"Run directory (default: ${OUT_ENV}/train_seed<seed>)")
    p.set_defaults(handler=cmd_train)

    p = commands.add_parser("sweep", help="Train and evaluate every agent weight and seed")
    p.add_argument("config", help="Experiment config (JSON)")
    p.add_argument("--out", default=None, help=f"Sweep directory (default: ${OUT_ENV}/sweep)")
    p.add_argument("--parallel", type=int, default=1, help="Worker processes")
    p.add_argument("--iterations", type=int, default=None, help="Override experiment.iterations")
    p.set_defaults(handler=cmd_sweep)

    p = commands.add_parser("eval", help="Evaluate a checkpoint with the policy mean")
    p.add_argument("checkpoint", help="Checkpoint file (.npz)")
    p.add_argument("config", help="Experiment config (JSON)")
    p.add_argument("--seed", type=int, default=None, help="Reset-noise seed")
    p.add_argument("--out", default=None, help="Output directory (default: <checkpoint dir>/eval)")
    p.set_defaults(handler=cmd_eval)

    p = commands.add_parser("plot", help="Plot smoothed cumulative returns")
    p.add_argument("logs", nargs="+", help="train_log.csv files")
    p.add_argument("--window", type=int, default=100, help="Moving-average window")
    p.add_argument("--out", default=None, help=f"SVG file (default: ${OUT_ENV}/learning_curves.svg)")
    p.set_defaults(handler=cmd_plot)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Run a command and return its exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if isinstance(e.code, int) else EXIT_USAGE

    logging.basicConfig(
        level=getattr(logging, args.log_level),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.handler(args)
    except (ConfigError, FileNotFoundError) as e:
        return _fail(EXIT_USAGE, str(e))
    except (CheckpointError, TrainingDivergedError, SimulationDivergedError, ValueError) as e:
        return _fail(EXIT_DATA, str(e))


if __name__ == "__main__":
    sys.exit(main())
