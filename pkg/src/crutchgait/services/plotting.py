"""Learning-curve charts (smoothed cumulative return per training log) as SVG."""

import logging
from pathlib import Path
from typing import Dict, Optional, Sequence, Union

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from crutchgait.services.harness import moving_average  # noqa: E402


logger = logging.getLogger(__name__)

STYLE = {
    "svg.hashsalt": "crutchgait",
    "svg.fonttype": "none",
    "font.size": 10,
    "axes.labelsize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "lines.linewidth": 1.2,
}


def series_id(index: int) -> str:
    return f"series-{index}"


def smoothed_returns(log: pd.DataFrame, window: int = 100) -> np.ndarray:
    """Trailing moving average of a training log's cum_reward column."""
    if "cum_reward" not in log.columns:
        raise ValueError("training log has no cum_reward column")
    return moving_average(log["cum_reward"], window)


def plot_learning_curves(
    logs: Dict[str, pd.DataFrame],
    out_path: Union[str, Path],
    window: int = 100,
    title: Optional[str] = None,
) -> Path:
    """
    Draw one smoothed cumulative-return line per training log.

    Args:
        logs: Legend label to training log (iter and cum_reward columns)
        out_path: Destination SVG file
        window: Moving-average window in iterations (1 plots the raw series)
        title: Optional chart title

    Returns:
        Path of the written SVG

    Raises:
        ValueError: If no logs are given or a log lacks cum_reward
    """
    if not logs:
        raise ValueError("at least one training log is required")
    out_path = Path(out_path)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(6.4, 4.0))
        for index, (label, log) in enumerate(logs.items()):
            values = smoothed_returns(log, window)
            x = log["iter"].to_numpy() if "iter" in log.columns else np.arange(1, len(values) + 1)
            (line,) = ax.plot(x, values, label=label)
            line.set_gid(series_id(index))
        ax.set_xlabel("iteration")
        ax.set_ylabel(f"cumulative return (moving average, {window})")
        if title:
            ax.set_title(title)
        ax.grid(True, alpha=0.3)
        ax.legend(loc="best")
        fig.tight_layout()
        fig.savefig(out_path, format="svg", metadata={"Date": None})
        plt.close(fig)
    logger.info(f"Wrote learning curves for {len(logs)} runs to {out_path}")
    return out_path


def read_logs(paths: Sequence[Union[str, Path]]) -> Dict[str, pd.DataFrame]:
    """Read training logs keyed by their run directory name."""
    logs: Dict[str, pd.DataFrame] = {}
    for path in paths:
        path = Path(path)
        label = path.parent.name or path.stem
        if label in logs:
            label = f"{label}_{len(logs)}"
        logs[label] = pd.read_csv(path)
    return logs
