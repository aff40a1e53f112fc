"""Fixed random projection from the intrinsic latent to the full soft prompt."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ProjectionSpec:
    """Dense ``output_dim x input_dim`` matrix with entries in [-1, 1]."""

    matrix: np.ndarray

    def __post_init__(self):
        if self.matrix.ndim != 2:
            raise ValueError("projection matrix must be 2-D")
        if np.any(np.abs(self.matrix) > 1.0):
            raise ValueError("projection entries must lie in [-1, 1]")
        self.matrix.setflags(write=False)

    @property
    def input_dim(self) -> int:
        return self.matrix.shape[1]

    @property
    def output_dim(self) -> int:
        return self.matrix.shape[0]


def make_projection(d: int, d_prime: int, rng: np.random.Generator) -> ProjectionSpec:
    """Draw A with i.i.d. Uniform(-1, 1) entries, row-major from ``rng``.

    No 1/sqrt(d') rescaling is applied.
    """
    if d < 1 or d_prime < 1:
        raise ValueError(f"projection dimensions must be >= 1, got d={d}, d_prime={d_prime}")
    return ProjectionSpec(rng.uniform(-1.0, 1.0, size=(d, d_prime)))


def project(spec: ProjectionSpec, latent) -> np.ndarray:
    latent = np.asarray(latent, dtype=float)
    if latent.shape != (spec.input_dim,):
        raise ValueError(f"latent has shape {latent.shape}, projection expects ({spec.input_dim},)")
    return spec.matrix @ latent


def as_token_rows(prompt: np.ndarray, num_soft_tokens: int, token_dim: int) -> np.ndarray:
    """Reshape a flat soft prompt to ``num_soft_tokens x token_dim`` for transmission."""
    prompt = np.asarray(prompt, dtype=float)
    if prompt.size != num_soft_tokens * token_dim:
        raise ValueError(
            f"soft prompt of length {prompt.size} cannot be viewed as {num_soft_tokens}x{token_dim}"
        )
    return prompt.reshape(num_soft_tokens, token_dim)
