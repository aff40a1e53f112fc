"""One-hidden-layer ReLU reward model, its gradient features, and AdamW training.

All parameters live in one flat vector laid out as
``[W1 (row-major, hidden x input), b1, W2, b2]``; the per-layer
attributes are views into it. The same order is used by
:func:`grad_params` and by the bandit's diagonal covariance.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

BETA1 = 0.9
BETA2 = 0.999
EPS = 1e-8
WEIGHT_DECAY = 0.01


@dataclass
class SurrogateNet:
    params: np.ndarray
    input_dim: int
    hidden_dim: int

    def __post_init__(self):
        self.params = np.asarray(self.params, dtype=float)
        if self.params.shape != (param_count(self.input_dim, self.hidden_dim),):
            raise ValueError("parameter vector does not match the declared shapes")

    @classmethod
    def from_layers(cls, W1, b1, W2, b2) -> "SurrogateNet":
        W1 = np.atleast_2d(np.asarray(W1, dtype=float))
        hidden, inp = W1.shape
        flat = np.concatenate([W1.ravel(), np.ravel(b1), np.ravel(W2), np.ravel(b2)])
        return cls(flat, inp, hidden)

    @property
    def W1(self) -> np.ndarray:
        return self.params[: self.hidden_dim * self.input_dim].reshape(self.hidden_dim, self.input_dim)

    @property
    def b1(self) -> np.ndarray:
        start = self.hidden_dim * self.input_dim
        return self.params[start : start + self.hidden_dim]

    @property
    def W2(self) -> np.ndarray:
        start = self.hidden_dim * (self.input_dim + 1)
        return self.params[start : start + self.hidden_dim]

    @property
    def b2(self) -> float:
        return float(self.params[-1])

    @property
    def num_params(self) -> int:
        return self.params.size

    def copy(self) -> "SurrogateNet":
        return SurrogateNet(self.params.copy(), self.input_dim, self.hidden_dim)


@dataclass
class OptimizerState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0
    beta1: float = BETA1
    beta2: float = BETA2
    eps: float = EPS
    weight_decay: float = WEIGHT_DECAY

    @classmethod
    def zeros(cls, n: int) -> "OptimizerState":
        return cls(np.zeros(n), np.zeros(n))

    def copy(self) -> "OptimizerState":
        return OptimizerState(
            self.m.copy(), self.v.copy(), self.step, self.beta1, self.beta2, self.eps, self.weight_decay
        )


@dataclass
class ObservationHistory:
    latents: List[np.ndarray] = field(default_factory=list)
    rewards: List[float] = field(default_factory=list)

    def append(self, latent, reward: float):
        latent = np.asarray(latent, dtype=float)
        if self.latents and latent.shape != self.latents[0].shape:
            raise ValueError("all latents in a history must share one length")
        if not np.isfinite(reward):
            raise ValueError(f"reward must be finite, got {reward!r}")
        self.latents.append(latent.copy())
        self.rewards.append(float(reward))

    def arrays(self) -> Tuple[np.ndarray, np.ndarray]:
        return np.vstack(self.latents), np.asarray(self.rewards, dtype=float)

    def copy(self) -> "ObservationHistory":
        return ObservationHistory(list(self.latents), list(self.rewards))

    def __len__(self):
        return len(self.rewards)


def param_count(input_dim: int, hidden_dim: int) -> int:
    return hidden_dim * input_dim + 2 * hidden_dim + 1


def decay_mask(input_dim: int, hidden_dim: int) -> np.ndarray:
    """True for weight entries (decayed), False for biases."""
    mask = np.zeros(param_count(input_dim, hidden_dim), dtype=bool)
    mask[: hidden_dim * input_dim] = True
    start = hidden_dim * (input_dim + 1)
    mask[start : start + hidden_dim] = True
    return mask


def init_surrogate(config, rng: np.random.Generator) -> Tuple[SurrogateNet, OptimizerState]:
    """Glorot-uniform weights, zero biases, zero optimizer moments."""
    d, m = config.intrinsic_dim, config.hidden_dim
    a1 = np.sqrt(6.0 / (d + m))
    a2 = np.sqrt(6.0 / (m + 1))
    W1 = rng.uniform(-a1, a1, size=(m, d))
    W2 = rng.uniform(-a2, a2, size=m)
    net = SurrogateNet.from_layers(W1, np.zeros(m), W2, 0.0)
    return net, OptimizerState.zeros(net.num_params)


def _check_input(net: SurrogateNet, x: np.ndarray):
    if x.shape[-1] != net.input_dim:
        raise ValueError(f"latent has length {x.shape[-1]}, surrogate expects {net.input_dim}")


def forward_batch(net: SurrogateNet, X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    _check_input(net, X)
    hidden = np.maximum(X @ net.W1.T + net.b1, 0.0)
    return hidden @ net.W2 + net.b2


def forward(net: SurrogateNet, latent) -> float:
    x = np.asarray(latent, dtype=float)
    if x.ndim != 1:
        raise ValueError("forward takes a single latent vector")
    return float(forward_batch(net, x)[0])


def grad_params(net: SurrogateNet, latent) -> np.ndarray:
    """Gradient of the network output w.r.t. the flat parameter vector.

    The rectifier's subgradient at 0 is taken as 0.
    """
    x = np.asarray(latent, dtype=float)
    if x.ndim != 1:
        raise ValueError("grad_params takes a single latent vector")
    _check_input(net, x)
    pre = net.W1 @ x + net.b1
    active = pre > 0
    back = net.W2 * active
    return np.concatenate([np.outer(back, x).ravel(), back, np.where(active, pre, 0.0), [1.0]])


def mse(net: SurrogateNet, X: np.ndarray, y: np.ndarray) -> float:
    return float(np.mean((forward_batch(net, X) - y) ** 2))


def _mse_grad(net: SurrogateNet, X: np.ndarray, y: np.ndarray) -> np.ndarray:
    pre = X @ net.W1.T + net.b1
    hidden = np.maximum(pre, 0.0)
    resid = hidden @ net.W2 + net.b2 - y
    g_out = 2.0 * resid / len(y)
    g_hidden = np.outer(g_out, net.W2) * (pre > 0)
    return np.concatenate([(g_hidden.T @ X).ravel(), g_hidden.sum(axis=0), hidden.T @ g_out, [g_out.sum()]])


def adamw_step(params: np.ndarray, grad: np.ndarray, opt: OptimizerState, lr: float, mask: np.ndarray):
    """One in-place AdamW update; decay is decoupled and hits ``mask`` entries only."""
    opt.step += 1
    opt.m *= opt.beta1
    opt.m += (1.0 - opt.beta1) * grad
    opt.v *= opt.beta2
    opt.v += (1.0 - opt.beta2) * grad * grad
    m_hat = opt.m / (1.0 - opt.beta1**opt.step)
    v_hat = opt.v / (1.0 - opt.beta2**opt.step)
    params[mask] *= 1.0 - lr * opt.weight_decay
    params -= lr * m_hat / (np.sqrt(v_hat) + opt.eps)


def train_local(
    net: SurrogateNet,
    opt: OptimizerState,
    history: ObservationHistory,
    steps: int = 40,
    lr: float = 3e-4,
) -> Tuple[SurrogateNet, OptimizerState]:
    """Full-batch MSE training, warm-started; returns fresh copies."""
    if len(history) == 0:
        raise ValueError("cannot train the surrogate on an empty history")
    net, opt = net.copy(), opt.copy()
    if steps <= 0:
        return net, opt
    X, y = history.arrays()
    mask = decay_mask(net.input_dim, net.hidden_dim)
    for _ in range(steps):
        adamw_step(net.params, _mse_grad(net, X, y), opt, lr, mask)
    return net, opt
