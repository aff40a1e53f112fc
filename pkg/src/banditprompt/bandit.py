"""NeuralUCB / NeuralTS selection over a quasi-random candidate pool.

Uncertainty uses gradient features of the surrogate with a diagonal
approximation of the design matrix: each parameter keeps its own running
sum ``lambda + feature_scale * sum(grad_j**2)``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.stats import qmc

from .config import ExperimentConfig, Policy
from .surrogate import (
    ObservationHistory,
    OptimizerState,
    SurrogateNet,
    forward,
    forward_batch,
    grad_params,
    init_surrogate,
    train_local,
)


@dataclass
class BanditState:
    net: SurrogateNet
    opt: OptimizerState
    history: ObservationHistory
    cov_diag: np.ndarray
    lambda_reg: float
    nu: float
    feature_scale: float
    local_iterations: int = 40
    learning_rate: float = 3e-4
    iteration: int = 0

    def copy(self) -> "BanditState":
        return BanditState(
            self.net.copy(),
            self.opt.copy(),
            self.history.copy(),
            self.cov_diag.copy(),
            self.lambda_reg,
            self.nu,
            self.feature_scale,
            self.local_iterations,
            self.learning_rate,
            self.iteration,
        )


def new_state(config: ExperimentConfig, rng: np.random.Generator) -> BanditState:
    net, opt = init_surrogate(config, rng)
    return BanditState(
        net=net,
        opt=opt,
        history=ObservationHistory(),
        cov_diag=np.full(net.num_params, float(config.lambda_reg)),
        lambda_reg=float(config.lambda_reg),
        nu=config.nu_at(0),
        feature_scale=config.effective_feature_scale,
        local_iterations=config.local_iterations,
        learning_rate=config.learning_rate,
    )


def gen_candidates(config: ExperimentConfig, stream_seed: int, t: int) -> np.ndarray:
    """Scrambled Sobol points mapped to [-1, 1]^d', one fresh pool per ``t``.

    The pool is a pure function of (``stream_seed``, ``t``), so iterations can
    be regenerated in any order.
    """
    if t < 0:
        raise ValueError("iteration index must be >= 0")
    seed = np.random.default_rng([stream_seed, t])
    sampler = qmc.Sobol(d=config.intrinsic_dim, scramble=True, seed=seed)
    with warnings.catch_warnings():
        # balance warning for non power-of-two pool sizes
        warnings.simplefilter("ignore", UserWarning)
        unit = sampler.random(config.candidate_pool_size)
    return 2.0 * unit - 1.0


def _sigma_batch(state: BanditState, X: np.ndarray) -> np.ndarray:
    """sigma for every row of ``X`` without materialising per-row gradients."""
    net = state.net
    m, d = net.hidden_dim, net.input_dim
    inv = 1.0 / state.cov_diag
    inv_W1 = inv[: m * d].reshape(m, d)
    inv_b1 = inv[m * d : m * d + m]
    inv_W2 = inv[m * d + m : m * d + 2 * m]
    inv_b2 = inv[-1]
    pre = X @ net.W1.T + net.b1
    active = pre > 0
    back_sq = (net.W2 * active) ** 2
    hidden_sq = np.where(active, pre, 0.0) ** 2
    total = np.einsum("ni,ij,nj->n", back_sq, inv_W1, X * X)
    total += back_sq @ inv_b1 + hidden_sq @ inv_W2 + inv_b2
    return np.sqrt(state.feature_scale * total)


def sigma_from_grad(grad, cov_diag, feature_scale: float) -> float:
    grad = np.asarray(grad, dtype=float)
    return float(np.sqrt(feature_scale * np.sum(grad * grad / cov_diag)))


def sigma(state: BanditState, latent) -> float:
    return sigma_from_grad(grad_params(state.net, latent), state.cov_diag, state.feature_scale)


def ucb_score(state: BanditState, latent) -> float:
    return forward(state.net, latent) + state.nu * sigma(state, latent)


def ts_sample(state: BanditState, latent, rng: np.random.Generator) -> float:
    """Draw from N(mu, (nu * sigma)^2); nu * sigma is the standard deviation."""
    mean = forward(state.net, latent)
    scale = state.nu * sigma(state, latent)
    if scale == 0.0:
        return mean
    return float(rng.normal(mean, scale))


def ucb_scores(state: BanditState, pool: np.ndarray) -> np.ndarray:
    return forward_batch(state.net, pool) + state.nu * _sigma_batch(state, pool)


def ts_samples(state: BanditState, pool: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    mean = forward_batch(state.net, pool)
    return mean + state.nu * _sigma_batch(state, pool) * rng.standard_normal(len(pool))


def select_next(
    state: Optional[BanditState],
    pool: Sequence,
    policy: Policy,
    rng: np.random.Generator,
) -> Tuple[int, np.ndarray]:
    """Pick the next latent; ties resolve to the lowest index.

    Cold start (empty history, or no state for RandomSearch) picks
    uniformly at random.
    """
    pool = np.asarray(pool, dtype=float)
    if pool.ndim != 2 or len(pool) == 0:
        raise ValueError("candidate pool is empty")
    policy = Policy(policy)
    if policy is Policy.RANDOM_SEARCH or state is None or len(state.history) == 0:
        index = int(rng.integers(len(pool)))
    elif policy is Policy.NEURAL_UCB:
        index = int(np.argmax(ucb_scores(state, pool)))
    else:
        index = int(np.argmax(ts_samples(state, pool, rng)))
    return index, pool[index].copy()


def update_posterior(
    state: BanditState,
    chosen,
    reward: float,
    steps: Optional[int] = None,
) -> BanditState:
    """Record an observation, widen the covariance, retrain the surrogate.

    The covariance increment uses the gradient at the pre-update net.
    ``steps=0`` leaves the net frozen. Returns a new state.
    """
    if not np.isfinite(reward):
        raise ValueError(f"reward must be finite, got {reward!r}")
    chosen = np.asarray(chosen, dtype=float)
    new = state.copy()
    g = grad_params(new.net, chosen)
    new.cov_diag += new.feature_scale * g * g
    new.history.append(chosen, reward)
    n_steps = new.local_iterations if steps is None else steps
    new.net, new.opt = train_local(new.net, new.opt, new.history, n_steps, new.learning_rate)
    new.iteration += 1
    return new
