"""Crutch-weight sweep: train and evaluate every (agent, seed) cell, then aggregate."""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import pandas as pd
from langgraph.graph import END, StateGraph

from crutchgait.services.base_workflow import BaseWorkflow, WorkflowState
from crutchgait.services.harness import METRIC_COLUMNS, evaluate, train, write_csv
from crutchgait.shared.config import ExperimentConfig, with_overrides
from crutchgait.shared.message_bus import (
    SWEEP_TOPIC,
    EventType,
    InMemoryMessageBus,
    MessageBus,
)


logger = logging.getLogger(__name__)

BASELINE_LABEL = "no_crutch_loss"
COMPARISON_COLUMNS = ["agent", "weight", "seed"] + METRIC_COLUMNS
TABLE_COLUMNS = ["agent", "weight", "runs"] + METRIC_COLUMNS


@dataclass(frozen=True)
class SweepCell:
    """One training-plus-evaluation run of the sweep grid."""
    agent: str
    rank: int
    weight: float
    seed: int
    config: ExperimentConfig
    out_dir: Optional[str] = None

    @property
    def name(self) -> str:
        return f"{self.agent}_seed{self.seed}"


def plan_cells(config: ExperimentConfig, out_dir: Optional[Union[str, Path]] = None) -> List[SweepCell]:
    """Enumerate cells in canonical order: baseline first, then agents, seeds ascending."""
    settings = config.experiment
    agents = [(f"agent_{i}", w) for i, w in enumerate(settings.agents, start=1)]
    if settings.include_baseline:
        agents.insert(0, (BASELINE_LABEL, 0.0))
    cells = []
    for rank, (label, weight) in enumerate(agents):
        for seed in sorted(settings.seeds):
            cell_dir = str(Path(out_dir) / f"{label}_seed{seed}") if out_dir is not None else None
            cells.append(SweepCell(label, rank, float(weight), seed, config, cell_dir))
    return cells


def run_cell(cell: SweepCell) -> Dict[str, Any]:
    """Train one cell with its own crutch weight and evaluate it with the common weight."""
    config = with_overrides(cell.config, reward={"w_crutch_reaction_force": cell.weight})
    result = train(config, cell.seed, out_dir=cell.out_dir)
    evaluation = evaluate(result.checkpoint, config, seed=cell.seed)
    if cell.out_dir is not None:
        write_csv(pd.DataFrame([evaluation.report.to_row()]), Path(cell.out_dir) / "eval_metrics.csv")
    metrics = evaluation.report.to_row()
    row = {"agent": cell.agent, "rank": cell.rank, "weight": cell.weight, "seed": cell.seed}
    row.update({column: metrics[column] for column in METRIC_COLUMNS})
    logger.info(f"Sweep cell {cell.name} done: crutch cost {row['mean_crutch_cost']:.4f}")
    return row


def aggregate(rows: List[Dict[str, Any]]) -> pd.DataFrame:
    """Per-agent arithmetic means of the cell metrics, in canonical agent order."""
    frame = pd.DataFrame(rows)
    grouped = frame.groupby(["rank", "agent", "weight"], sort=True)
    table = grouped[METRIC_COLUMNS].mean().reset_index()
    table["runs"] = grouped.size().to_numpy()
    return table[TABLE_COLUMNS]


class SweepState(WorkflowState, total=False):
    """State of the sweep graph."""
    experiment_config: ExperimentConfig
    out_dir: Optional[str]
    parallel: int
    cells: List[SweepCell]
    rows: List[Dict[str, Any]]
    comparison: pd.DataFrame
    table: pd.DataFrame


class SweepWorkflow(BaseWorkflow):
    """
    Sweep over crutch reaction weights and seeds.

    Graph structure:
    START -> plan_cells -> run_cells -> aggregate -> write_reports -> END
    """

    def __init__(self, message_bus: MessageBus, workflow_id: Optional[str] = None):
        super().__init__(message_bus, workflow_id, workflow_type="sweep")

    def _build_graph(self) -> Any:
        workflow = StateGraph(SweepState)

        workflow.add_node("plan_cells", self._plan_cells_node)
        workflow.add_node("run_cells", self._run_cells_node)
        workflow.add_node("aggregate", self._aggregate_node)
        workflow.add_node("write_reports", self._write_reports_node)

        workflow.set_entry_point("plan_cells")
        workflow.add_edge("plan_cells", "run_cells")
        workflow.add_edge("run_cells", "aggregate")
        workflow.add_edge("aggregate", "write_reports")
        workflow.add_edge("write_reports", END)

        return workflow.compile()

    def _plan_cells_node(self, state: SweepState) -> Dict[str, Any]:
        cells = plan_cells(state["experiment_config"], state.get("out_dir"))
        logger.info(f"Node: plan_cells ({len(cells)} cells)")
        return {"cells": cells}

    def _run_cells_node(self, state: SweepState) -> Dict[str, Any]:
        cells = state["cells"]
        parallel = max(1, state.get("parallel", 1))
        logger.info(f"Node: run_cells ({len(cells)} cells, {parallel} workers)")
        if parallel == 1:
            rows = []
            for cell in cells:
                rows.append(run_cell(cell))
                self._cell_done(rows[-1])
        else:
            with ProcessPoolExecutor(max_workers=parallel) as executor:
                rows = list(executor.map(run_cell, cells))
            for row in rows:
                self._cell_done(row)
        return {"rows": rows}

    def _cell_done(self, row: Dict[str, Any]) -> None:
        self.publish_event(EventType.SWEEP_CELL_COMPLETED.value, row, SWEEP_TOPIC)

    def _aggregate_node(self, state: SweepState) -> Dict[str, Any]:
        logger.info("Node: aggregate")
        rows = state.get("rows") or []
        if not rows:
            return {"error": "sweep produced no results"}
        ordered = sorted(rows, key=lambda row: (row["rank"], row["seed"]))
        comparison = pd.DataFrame(ordered)[COMPARISON_COLUMNS]
        return {"comparison": comparison, "table": aggregate(ordered)}

    def _write_reports_node(self, state: SweepState) -> Dict[str, Any]:
        logger.info("Node: write_reports")
        if state.get("error"):
            return {}
        artifacts: Dict[str, str] = {}
        out_dir = state.get("out_dir")
        if out_dir is not None:
            root = Path(out_dir)
            root.mkdir(parents=True, exist_ok=True)
            artifacts["comparison"] = str(write_csv(state["comparison"], root / "comparison.csv"))
            artifacts["table5"] = str(write_csv(state["table"], root / "table5.csv"))
        self.publish_event(
            EventType.SWEEP_COMPLETED.value,
            {"cells": len(state["comparison"]), "artifacts": artifacts},
            SWEEP_TOPIC,
        )
        return {"result": {"artifacts": artifacts}}


@dataclass
class SweepResult:
    comparison: pd.DataFrame
    table: pd.DataFrame
    artifacts: Dict[str, str]


def sweep(
    config: ExperimentConfig,
    out_dir: Optional[Union[str, Path]] = None,
    parallel: int = 1,
    bus: Optional[MessageBus] = None,
) -> SweepResult:
    """
    Train and evaluate every (agent weight, seed) cell and aggregate per agent.

    Args:
        config: Experiment configuration with the agent weights and seeds
        out_dir: Directory for per-cell runs, comparison.csv and table5.csv
        parallel: Number of worker processes
        bus: Message bus receiving sweep events

    Returns:
        SweepResult with the per-cell comparison and the per-agent table
    """
    workflow = SweepWorkflow(bus or InMemoryMessageBus())
    final = workflow.execute({
        "task_id": "sweep",
        "context": {},
        "experiment_config": config,
        "out_dir": str(out_dir) if out_dir is not None else None,
        "parallel": parallel,
    })
    if final.get("error"):
        raise RuntimeError(final["error"])
    return SweepResult(
        comparison=final["comparison"],
        table=final["table"],
        artifacts=(final.get("result") or {}).get("artifacts", {}),
    )
