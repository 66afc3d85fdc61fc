"""Checkpoint files: NumPy ``.npz`` archives with a JSON shape header."""

import json
import logging
import zipfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np

from crutchgait.agents.nn import MlpParams
from crutchgait.shared.errors import CheckpointError


logger = logging.getLogger(__name__)

FORMAT_NAME = "crutchgait-checkpoint"
FORMAT_VERSION = 1
NETWORKS = ("actor", "critic")


@dataclass
class PolicyCheckpoint:
    """Everything needed to resume or evaluate a policy."""
    actor: MlpParams
    critic: MlpParams
    iteration: int
    normalizer: Optional[Dict[str, np.ndarray]] = None
    entropy_coef: float = 0.0
    metadata: Dict[str, Any] = field(default_factory=dict)


def checkpoint_name(iteration: int) -> str:
    return f"checkpoint_{iteration}.npz"


def save_checkpoint(checkpoint: PolicyCheckpoint, path: Union[str, Path]) -> Path:
    """
    Write a checkpoint; parameters round-trip bit-exactly.

    Args:
        checkpoint: Networks and run state to persist
        path: Destination file

    Returns:
        Path written
    """
    path = Path(path)
    arrays: Dict[str, np.ndarray] = {}
    networks: Dict[str, Any] = {}
    for name in NETWORKS:
        params: MlpParams = getattr(checkpoint, name)
        networks[name] = {"widths": params.widths, "activations": params.activations}
        for index, (w, b) in enumerate(zip(params.weights, params.biases)):
            arrays[f"{name}_w{index}"] = w
            arrays[f"{name}_b{index}"] = b
    if checkpoint.normalizer is not None:
        for key, value in checkpoint.normalizer.items():
            arrays[f"normalizer_{key}"] = np.asarray(value)
    header = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "iteration": checkpoint.iteration,
        "entropy_coef": checkpoint.entropy_coef,
        "networks": networks,
        "normalizer": sorted(checkpoint.normalizer) if checkpoint.normalizer is not None else None,
        "metadata": checkpoint.metadata,
    }
    with open(path, "wb") as fh:
        np.savez(fh, meta=np.array(json.dumps(header, sort_keys=True)), **arrays)
    logger.info(f"Saved checkpoint at iteration {checkpoint.iteration} to {path}")
    return path


def _read_network(name: str, header: Dict[str, Any], archive: Any) -> MlpParams:
    widths = [int(w) for w in header["widths"]]
    activations = list(header["activations"])
    if len(activations) != len(widths) - 1:
        raise CheckpointError(f"checkpoint corrupt: {name} has mismatched layer count")
    weights, biases = [], []
    for index in range(len(widths) - 1):
        w_key, b_key = f"{name}_w{index}", f"{name}_b{index}"
        if w_key not in archive.files or b_key not in archive.files:
            raise CheckpointError(f"checkpoint corrupt: missing {name} layer {index}")
        w, b = archive[w_key], archive[b_key]
        if w.shape != (widths[index], widths[index + 1]) or b.shape != (widths[index + 1],):
            raise CheckpointError(
                f"checkpoint corrupt: {name} layer {index} has shape {w.shape}/{b.shape}, "
                f"header says ({widths[index]}, {widths[index + 1]})"
            )
        weights.append(np.array(w, dtype=float))
        biases.append(np.array(b, dtype=float))
    try:
        return MlpParams(weights=weights, biases=biases, activations=activations)
    except ValueError as e:
        raise CheckpointError(f"checkpoint corrupt: {e}") from e


def load_checkpoint(path: Union[str, Path]) -> PolicyCheckpoint:
    """
    Read a checkpoint and verify every array against its header.

    Raises:
        FileNotFoundError: If the file does not exist
        CheckpointError: If the file is unreadable or inconsistent
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    try:
        with np.load(path, allow_pickle=False) as archive:
            header = json.loads(str(archive["meta"]))
            if header.get("format") != FORMAT_NAME:
                raise CheckpointError(f"checkpoint corrupt: unknown format in {path}")
            networks = {
                name: _read_network(name, header["networks"][name], archive) for name in NETWORKS
            }
            normalizer = None
            if header.get("normalizer") is not None:
                normalizer = {
                    key: np.array(archive[f"normalizer_{key}"]) for key in header["normalizer"]
                }
    except CheckpointError:
        raise
    except (OSError, ValueError, KeyError, TypeError, zipfile.BadZipFile) as e:
        raise CheckpointError(f"checkpoint corrupt: {path}: {e}") from e
    logger.info(f"Loaded checkpoint {path} (iteration {header['iteration']})")
    return PolicyCheckpoint(
        actor=networks["actor"],
        critic=networks["critic"],
        iteration=int(header["iteration"]),
        normalizer=normalizer,
        entropy_coef=float(header.get("entropy_coef", 0.0)),
        metadata=header.get("metadata", {}),
    )
