"""Orchestration services: training harness, sweep workflow, plotting and CLI."""

from crutchgait.services.base_workflow import BaseWorkflow, WorkflowState
from crutchgait.services.harness import compute_metrics, evaluate, make_env, train
from crutchgait.services.plotting import plot_learning_curves
from crutchgait.services.sweep_workflow import SweepWorkflow, sweep

__all__ = [
    "BaseWorkflow",
    "WorkflowState",
    "compute_metrics",
    "evaluate",
    "make_env",
    "train",
    "plot_learning_curves",
    "SweepWorkflow",
    "sweep",
]
