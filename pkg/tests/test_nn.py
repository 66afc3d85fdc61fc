"""Tests for the networks, Gaussian policy head and Adam."""

import math

import numpy as np
import pytest

from crutchgait.agents.nn import (
    Adam,
    MlpParams,
    init_actor,
    init_critic,
    init_mlp,
    inverse_softplus,
    log_prob,
    mlp_backward,
    mlp_forward,
    orthogonal,
    policy_entropy,
    policy_sample,
    softplus,
    split_gaussian,
)
from crutchgait.agents.ppo import actor_objective, actor_output_gradient, prob_ratio


FD_STEP = 1e-5


def relative_error(numeric: np.ndarray, analytic: np.ndarray) -> float:
    scale = max(np.linalg.norm(numeric), np.linalg.norm(analytic), 1e-8)
    return float(np.linalg.norm(numeric - analytic) / scale)


def numeric_gradient(loss, params: MlpParams) -> list:
    """Central differences of loss() with respect to every parameter entry."""
    grads = []
    for array in params.parameters():
        grad = np.zeros_like(array)
        for index in np.ndindex(array.shape):
            original = array[index]
            array[index] = original + FD_STEP
            plus = loss()
            array[index] = original - FD_STEP
            minus = loss()
            array[index] = original
            grad[index] = (plus - minus) / (2.0 * FD_STEP)
        grads.append(grad)
    return grads


def random_network(rng: np.random.Generator) -> MlpParams:
    depth = int(rng.integers(1, 4))
    widths = [int(w) for w in rng.integers(1, 6, size=depth + 1)]
    hidden = [str(rng.choice(["tanh", "linear", "softplus"])) for _ in range(depth - 1)]
    head = str(rng.choice(["linear", "softplus", "gaussian"]))
    if head == "gaussian":
        widths[-1] = 2 * max(1, widths[-1] // 2)
    return init_mlp(widths, hidden + [head], rng, gains=rng.uniform(0.5, 1.5, size=depth))


class TestMlp:
    """Test suite for forward and backward passes."""

    def test_backward_matches_finite_differences(self):
        """Test reverse-mode gradients on 25 random networks."""
        rng = np.random.default_rng(0)
        for _ in range(25):
            params = random_network(rng)
            x = rng.normal(size=(4, params.widths[0]))
            weights = rng.normal(size=(4, params.widths[-1]))

            def loss() -> float:
                return float(np.sum(mlp_forward(params, x)[0] * weights))

            _, cache = mlp_forward(params, x)
            analytic = mlp_backward(params, cache, weights).parameters()
            for fd, an in zip(numeric_gradient(loss, params), analytic):
                assert relative_error(fd, an) < 1e-4

    def test_actor_objective_gradient(self):
        """Test the PPO actor gradient through the gaussian head on 20 random batches."""
        rng = np.random.default_rng(1)
        for trial in range(20):
            obs_dim, act_dim = int(rng.integers(1, 5)), int(rng.integers(1, 4))
            params = init_actor(obs_dim, act_dim, 6, rng, init_std=float(rng.uniform(0.3, 1.5)))
            params.weights[-1] += rng.normal(0.0, 0.3, size=params.weights[-1].shape)
            obs = rng.normal(size=(8, obs_dim))
            start = split_gaussian(mlp_forward(params, obs)[0])
            actions = start.mean + start.std * rng.normal(size=start.mean.shape)
            # perturb the old log-probs so some samples sit in the clipped region
            old = log_prob(start, actions) + rng.normal(0.0, 0.3, size=8)
            adv = rng.normal(size=8)

            def loss() -> float:
                pol = split_gaussian(mlp_forward(params, obs)[0])
                return actor_objective(pol, actions, old, adv, 0.2, 0.01)

            out, cache = mlp_forward(params, obs)
            pol = split_gaussian(out)
            ratio = prob_ratio(log_prob(pol, actions), old)
            head = actor_output_gradient(pol, actions, ratio, adv, 0.2, 0.01)
            analytic = mlp_backward(params, cache, head).parameters()
            for fd, an in zip(numeric_gradient(loss, params), analytic):
                assert relative_error(fd, an) < 1e-4, f"trial {trial}"

    @pytest.mark.parametrize("rows,cols", [(3, 7), (7, 3), (4, 4), (1, 5)])
    def test_orthogonal_weights_are_contiguous(self, rows, cols):
        """Test fresh weights share the memory layout of arrays reloaded from disk."""
        weight = orthogonal(rows, cols, np.random.default_rng(0), gain=2.0)
        assert weight.shape == (rows, cols)
        assert weight.flags.c_contiguous
        small = min(rows, cols)
        gram = weight @ weight.T if rows <= cols else weight.T @ weight
        np.testing.assert_allclose(gram, 4.0 * np.eye(small), atol=1e-12)

    def test_critic_weights_are_contiguous(self):
        """Test every layer of a wide critic is C-contiguous."""
        params = init_critic(3, 16, np.random.default_rng(0))
        assert all(w.flags.c_contiguous for w in params.weights)

    def test_vector_input_is_squeezed(self):
        """Test a single input vector gives a single output vector."""
        params = init_critic(3, 4, np.random.default_rng(0))
        output, _ = mlp_forward(params, np.zeros(3))
        assert output.shape == (1,)

    def test_rejects_wrong_input_width(self):
        """Test the first layer width is enforced."""
        params = init_critic(3, 4, np.random.default_rng(0))
        with pytest.raises(ValueError, match="input width 3"):
            mlp_forward(params, np.zeros(5))

    def test_rejects_inconsistent_layers(self):
        """Test malformed parameter sets are rejected."""
        with pytest.raises(ValueError, match="unknown activation"):
            MlpParams([np.zeros((2, 2))], [np.zeros(2)], ["relu"])
        with pytest.raises(ValueError, match="even width"):
            MlpParams([np.zeros((2, 3))], [np.zeros(3)], ["gaussian"])


class TestGaussianPolicy:
    """Test suite for the Gaussian action distribution."""

    def test_actor_initialization(self):
        """Test the initial policy has near-zero mean and the configured std."""
        params = init_actor(46, 10, 64, np.random.default_rng(0), init_std=1.0)
        pol = split_gaussian(mlp_forward(params, np.ones(46))[0])
        assert np.all(np.abs(pol.mean) < 0.1)
        np.testing.assert_allclose(pol.std, 1.0, atol=0.06)
        assert softplus(np.array(inverse_softplus(0.7))) == pytest.approx(0.7, abs=1e-12)

    def test_entropy_values(self):
        """Test closed-form entropies of unit and scaled Gaussians."""
        assert policy_entropy(np.ones(1)) == pytest.approx(1.4189385, abs=1e-6)
        assert policy_entropy(np.ones(10)) == pytest.approx(14.189385, abs=1e-5)
        doubled = policy_entropy(np.full(10, 2.0)) - policy_entropy(np.ones(10))
        assert doubled == pytest.approx(10.0 * math.log(2.0), abs=1e-12)

    def test_log_prob_of_mean(self):
        """Test the density peak of a unit Gaussian."""
        pol = split_gaussian(np.array([0.0, 1.0]))
        assert log_prob(pol, np.array([0.0])) == pytest.approx(-0.5 * math.log(2 * math.pi), abs=1e-12)

    def test_samples_follow_density(self):
        """Test sample moments and mean log-probability match the distribution."""
        rng = np.random.default_rng(0)
        pol = split_gaussian(np.array([0.5, -1.0, 0.3, 2.0]))
        draws = [policy_sample(pol, rng) for _ in range(20000)]
        actions = np.array([a for a, _ in draws])
        logps = np.array([lp for _, lp in draws])
        np.testing.assert_allclose(actions.mean(axis=0), [0.5, -1.0], atol=0.05)
        np.testing.assert_allclose(actions.std(axis=0), [0.3, 2.0], rtol=0.03)
        np.testing.assert_allclose(logps, log_prob(pol, actions), atol=1e-12)
        # the expected negative log density is the entropy
        assert -logps.mean() == pytest.approx(float(policy_entropy(pol.std)), abs=0.03)


class TestAdam:
    """Test suite for the optimizer."""

    def test_zero_learning_rate_leaves_parameters(self):
        """Test lr = 0 keeps every parameter bitwise unchanged."""
        rng = np.random.default_rng(0)
        params = init_actor(4, 2, 8, rng)
        before = [p.copy() for p in params.parameters()]
        optimizer = Adam(params.parameters(), learning_rate=0.0)
        for _ in range(5):
            optimizer.step(params.parameters(), [rng.normal(size=p.shape) for p in before])
        for old, new in zip(before, params.parameters()):
            np.testing.assert_array_equal(old, new)

    def test_first_step_moves_by_learning_rate(self):
        """Test the bias-corrected first step has magnitude lr per entry."""
        p = np.array([1.0, -2.0])
        optimizer = Adam([p], learning_rate=0.1)
        optimizer.step([p], [np.array([3.0, -0.5])])
        np.testing.assert_allclose(p, [0.9, -1.9], atol=1e-7)

    def test_minimizes_quadratic(self):
        """Test Adam drives a convex quadratic to its minimum."""
        p = np.array([5.0, -3.0])
        optimizer = Adam([p], learning_rate=0.1)
        for _ in range(2000):
            optimizer.step([p], [2.0 * (p - np.array([1.0, 2.0]))])
        np.testing.assert_allclose(p, [1.0, 2.0], atol=1e-2)
