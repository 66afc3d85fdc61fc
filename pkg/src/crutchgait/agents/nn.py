"""
Fully-connected networks with explicit forward/backward passes.

Layers compute ``x @ W + b`` on row-major batches. The ``gaussian`` output
activation splits its units in half: the first half is the linear action mean,
the second half goes through softplus and is the standard deviation.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np


logger = logging.getLogger(__name__)

ACTIVATIONS = ("tanh", "linear", "softplus", "gaussian")
LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass
class MlpParams:
    """Weights (in × out) and biases of each layer with its activation tag."""
    weights: List[np.ndarray]
    biases: List[np.ndarray]
    activations: List[str]

    def __post_init__(self) -> None:
        if not (len(self.weights) == len(self.biases) == len(self.activations)):
            raise ValueError("weights, biases and activations must have one entry per layer")
        for index, (w, b, act) in enumerate(zip(self.weights, self.biases, self.activations)):
            if act not in ACTIVATIONS:
                raise ValueError(f"layer {index}: unknown activation {act}")
            if w.ndim != 2 or b.shape != (w.shape[1],):
                raise ValueError(f"layer {index}: bias shape {b.shape} does not match {w.shape}")
            if index and w.shape[0] != self.weights[index - 1].shape[1]:
                raise ValueError(f"layer {index}: input width {w.shape[0]} does not match previous")
            if act == "gaussian" and w.shape[1] % 2:
                raise ValueError(f"layer {index}: gaussian head needs an even width")

    @property
    def widths(self) -> List[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    def parameters(self) -> List[np.ndarray]:
        """Arrays in optimizer order: W0, b0, W1, b1, ..."""
        return [p for pair in zip(self.weights, self.biases) for p in pair]

    def copy(self) -> "MlpParams":
        return MlpParams(
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            activations=list(self.activations),
        )

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(p)) for p in self.parameters())


@dataclass
class MlpCache:
    """Layer inputs, pre-activations and outputs of a forward pass."""
    inputs: List[np.ndarray]
    pre_activations: List[np.ndarray]
    outputs: List[np.ndarray]
    squeeze: bool


@dataclass
class MlpGradients:
    weights: List[np.ndarray]
    biases: List[np.ndarray]

    def parameters(self) -> List[np.ndarray]:
        return [g for pair in zip(self.weights, self.biases) for g in pair]


@dataclass(frozen=True)
class GaussianPolicyOutput:
    """Diagonal Gaussian over actions."""
    mean: np.ndarray
    std: np.ndarray


def softplus(x: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, x)


def sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def inverse_softplus(y: float) -> float:
    """Bias that makes softplus output ``y``."""
    if y <= 0.0:
        raise ValueError(f"softplus output must be positive, got {y}")
    return float(y + math.log(-math.expm1(-y)))


def _activate(kind: str, z: np.ndarray) -> np.ndarray:
    if kind == "tanh":
        return np.tanh(z)
    if kind == "linear":
        return z
    if kind == "softplus":
        return softplus(z)
    half = z.shape[-1] // 2
    return np.concatenate([z[..., :half], softplus(z[..., half:])], axis=-1)


def _activation_grad(kind: str, z: np.ndarray, a: np.ndarray) -> np.ndarray:
    if kind == "tanh":
        return 1.0 - a**2
    if kind == "linear":
        return np.ones_like(z)
    if kind == "softplus":
        return sigmoid(z)
    half = z.shape[-1] // 2
    return np.concatenate([np.ones_like(z[..., :half]), sigmoid(z[..., half:])], axis=-1)


def mlp_forward(params: MlpParams, x: np.ndarray) -> Tuple[np.ndarray, MlpCache]:
    """
    Run the network on one input vector or a batch of rows.

    Args:
        params: Network parameters
        x: Input of shape (in,) or (batch, in)

    Returns:
        Output with the same leading shape as x, and the cache for mlp_backward

    Raises:
        ValueError: If the input width does not match the first layer
    """
    x = np.asarray(x, dtype=float)
    squeeze = x.ndim == 1
    h = np.atleast_2d(x)
    if h.shape[-1] != params.widths[0]:
        raise ValueError(f"expected input width {params.widths[0]}, got {h.shape[-1]}")
    inputs, pre, outputs = [], [], []
    for w, b, act in zip(params.weights, params.biases, params.activations):
        inputs.append(h)
        z = h @ w + b
        h = _activate(act, z)
        pre.append(z)
        outputs.append(h)
    cache = MlpCache(inputs=inputs, pre_activations=pre, outputs=outputs, squeeze=squeeze)
    return (h[0] if squeeze else h), cache


def mlp_backward(params: MlpParams, cache: MlpCache, grad_output: np.ndarray) -> MlpGradients:
    """
    Reverse-mode gradients of a scalar loss with respect to all parameters.

    Args:
        params: Parameters used in the forward pass
        cache: Cache returned by mlp_forward
        grad_output: dLoss/dOutput, same shape as the forward output

    Returns:
        Gradients matching params layer by layer
    """
    grad = np.atleast_2d(np.asarray(grad_output, dtype=float))
    grad_w: List[np.ndarray] = [np.empty(0)] * len(params.weights)
    grad_b: List[np.ndarray] = [np.empty(0)] * len(params.weights)
    for index in reversed(range(len(params.weights))):
        z, a = cache.pre_activations[index], cache.outputs[index]
        delta = grad * _activation_grad(params.activations[index], z, a)
        grad_w[index] = cache.inputs[index].T @ delta
        grad_b[index] = delta.sum(axis=0)
        grad = delta @ params.weights[index].T
    return MlpGradients(weights=grad_w, biases=grad_b)


def orthogonal(rows: int, cols: int, rng: np.random.Generator, gain: float = 1.0) -> np.ndarray:
    """Orthogonal matrix (semi-orthogonal when not square) scaled by gain."""
    flat = rng.standard_normal((max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(flat)
    q *= np.sign(np.diag(r))
    if rows < cols:
        q = q.T
    return np.ascontiguousarray(gain * q[:rows, :cols])


def init_mlp(
    widths: Sequence[int],
    activations: Sequence[str],
    rng: np.random.Generator,
    gains: Optional[Sequence[float]] = None,
    head_bias: Optional[np.ndarray] = None,
) -> MlpParams:
    """
    Orthogonally initialized network with zero biases.

    Args:
        widths: Layer widths including input and output
        activations: One tag per layer
        rng: Random generator
        gains: Per-layer init gains (default 1.0)
        head_bias: Optional bias of the output layer
    """
    layers = len(widths) - 1
    if len(activations) != layers:
        raise ValueError(f"expected {layers} activation tags, got {len(activations)}")
    gains = list(gains) if gains is not None else [1.0] * layers
    weights = [orthogonal(widths[i], widths[i + 1], rng, gains[i]) for i in range(layers)]
    biases = [np.zeros(widths[i + 1]) for i in range(layers)]
    if head_bias is not None:
        biases[-1] = np.asarray(head_bias, dtype=float).copy()
    return MlpParams(weights=weights, biases=biases, activations=list(activations))


def init_actor(
    obs_dim: int, act_dim: int, hidden: int, rng: np.random.Generator, init_std: float = 1.0
) -> MlpParams:
    """One tanh hidden layer and a gaussian head: near-zero mean, softplus std at init_std."""
    head_bias = np.concatenate([np.zeros(act_dim), np.full(act_dim, inverse_softplus(init_std))])
    return init_mlp(
        [obs_dim, hidden, 2 * act_dim],
        ["tanh", "gaussian"],
        rng,
        gains=[1.0, 0.01],
        head_bias=head_bias,
    )


def init_critic(obs_dim: int, hidden: int, rng: np.random.Generator) -> MlpParams:
    """One tanh hidden layer and a linear scalar value head."""
    return init_mlp([obs_dim, hidden, 1], ["tanh", "linear"], rng)


def split_gaussian(output: np.ndarray) -> GaussianPolicyOutput:
    """Split a gaussian-head output into mean and standard deviation."""
    half = output.shape[-1] // 2
    return GaussianPolicyOutput(mean=output[..., :half], std=output[..., half:])


def log_prob(out: GaussianPolicyOutput, action: np.ndarray) -> np.ndarray:
    """Log density of actions, summed over the action dimensions."""
    z = (np.asarray(action, dtype=float) - out.mean) / out.std
    return np.sum(-np.log(out.std) - LOG_SQRT_2PI - 0.5 * z**2, axis=-1)


def policy_sample(
    out: GaussianPolicyOutput, rng: np.random.Generator
) -> Tuple[np.ndarray, np.ndarray]:
    """Draw an action and return it with its log probability."""
    action = out.mean + out.std * rng.standard_normal(np.shape(out.mean))
    return action, log_prob(out, action)


def policy_entropy(std: np.ndarray) -> np.ndarray:
    """Differential entropy of a diagonal Gaussian, summed over dimensions."""
    std = np.asarray(std, dtype=float)
    return np.sum(0.5 * np.log(2.0 * math.pi * math.e * std**2), axis=-1)


class Adam:
    """Adam optimizer updating a list of arrays in place."""

    def __init__(
        self,
        params: Sequence[np.ndarray],
        learning_rate: float = 3e-4,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, params: Sequence[np.ndarray], grads: Sequence[np.ndarray]) -> None:
        self.t += 1
        correction1 = 1.0 - self.beta1**self.t
        correction2 = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g**2
            if self.learning_rate > 0.0:
                p -= self.learning_rate * (m / correction1) / (np.sqrt(v / correction2) + self.eps)
