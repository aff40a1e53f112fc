"""Experiment configuration and deterministic RNG substreams."""

from __future__ import annotations

import dataclasses
import enum
import hashlib
import json
from dataclasses import dataclass, field
from typing import Any, Mapping, Optional

import numpy as np

from .errors import ConfigError


class Policy(str, enum.Enum):
    NEURAL_UCB = "NeuralUCB"
    NEURAL_TS = "NeuralTS"
    RANDOM_SEARCH = "RandomSearch"

    @classmethod
    def parse(cls, value: str) -> "Policy":
        key = str(value).replace("_", "").replace("-", "").lower()
        aliases = {
            "neuralucb": cls.NEURAL_UCB,
            "ucb": cls.NEURAL_UCB,
            "neuralts": cls.NEURAL_TS,
            "ts": cls.NEURAL_TS,
            "randomsearch": cls.RANDOM_SEARCH,
            "random": cls.RANDOM_SEARCH,
        }
        try:
            return aliases[key]
        except KeyError:
            raise ConfigError(f"unknown policy {value!r}", "policy", value) from None


class Purpose(str, enum.Enum):
    PROJECTION = "Projection"
    CANDIDATES = "Candidates"
    SURROGATE = "Surrogate"
    POLICY = "Policy"
    ORACLE = "Oracle"


DEFAULT_INSTRUCTION = "Generate a headline for the following article."


@dataclass(frozen=True)
class OracleSpec:
    """Describes where rewards come from.

    ``kind="synthetic"`` draws a hidden preference landscape per profile
    (``rank`` rows, softness ``temperature``); ``kind="rouge"`` queries a
    generation service at ``endpoint`` and scores its text against gold.
    """

    kind: str = "synthetic"
    rank: int = 10
    temperature: float = 2.0
    compose_projection: bool = False
    endpoint: Optional[str] = None
    instruction: str = DEFAULT_INSTRUCTION
    timeout: float = 30.0

    def __post_init__(self):
        if self.kind not in ("synthetic", "rouge"):
            raise ConfigError(
                f"reward_oracle.kind must be 'synthetic' or 'rouge', got {self.kind!r}",
                "reward_oracle.kind",
                self.kind,
            )
        _check_int("reward_oracle.rank", self.rank)
        _check_positive("reward_oracle.temperature", self.temperature)
        _check_positive("reward_oracle.timeout", self.timeout)
        if not isinstance(self.compose_projection, bool):
            raise ConfigError(
                "reward_oracle.compose_projection must be a boolean",
                "reward_oracle.compose_projection",
                self.compose_projection,
            )


@dataclass(frozen=True)
class ExperimentConfig:
    intrinsic_dim: int = 100
    num_soft_tokens: int = 5
    token_dim: int = 4096
    lambda_reg: float = 0.1
    nu: float = 0.1
    total_iterations: int = 165
    hidden_dim: int = 100
    local_iterations: int = 40
    learning_rate: float = 3e-4
    candidate_pool_size: int = 500
    policy: Policy = Policy.NEURAL_UCB
    seed: int = 42
    feature_scale: Optional[float] = None
    reward_oracle: OracleSpec = field(default_factory=OracleSpec)

    def __post_init__(self):
        for name in (
            "intrinsic_dim",
            "num_soft_tokens",
            "token_dim",
            "total_iterations",
            "hidden_dim",
            "local_iterations",
            "candidate_pool_size",
        ):
            _check_int(name, getattr(self, name))
        _check_positive("lambda_reg", self.lambda_reg)
        _check_positive("learning_rate", self.learning_rate)
        if not _is_real(self.nu) or not self.nu >= 0 or not np.isfinite(self.nu):
            raise ConfigError(f"nu must be a finite real >= 0, got {self.nu!r}", "nu", self.nu)
        if self.feature_scale is not None:
            _check_positive("feature_scale", self.feature_scale)
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}", "seed", self.seed)
        if not isinstance(self.policy, Policy):
            object.__setattr__(self, "policy", Policy.parse(self.policy))
        if not isinstance(self.reward_oracle, OracleSpec):
            raise ConfigError("reward_oracle must be an OracleSpec", "reward_oracle", self.reward_oracle)

    @property
    def prompt_dim(self) -> int:
        """Full soft-prompt length d = token_dim * num_soft_tokens."""
        return self.token_dim * self.num_soft_tokens

    @property
    def effective_feature_scale(self) -> float:
        return 1.0 / self.hidden_dim if self.feature_scale is None else float(self.feature_scale)

    def nu_at(self, t: int) -> float:
        """Exploration weight at iteration ``t``; constant by default."""
        return float(self.nu)

    def replace(self, **changes) -> "ExperimentConfig":
        if isinstance(changes.get("reward_oracle"), Mapping):
            changes["reward_oracle"] = _oracle_from_mapping(changes["reward_oracle"])
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["policy"] = self.policy.value
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def fingerprint(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


_CONFIG_FIELDS = {f.name for f in dataclasses.fields(ExperimentConfig)}
_ORACLE_FIELDS = {f.name for f in dataclasses.fields(OracleSpec)}


def _is_real(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _check_int(name, value):
    if isinstance(value, bool) or not isinstance(value, int) or value < 1:
        raise ConfigError(f"{name} must be a positive integer, got {value!r}", name, value)


def _check_positive(name, value):
    if not _is_real(value) or not value > 0 or not np.isfinite(value):
        raise ConfigError(f"{name} must be a positive real, got {value!r}", name, value)


def _oracle_from_mapping(data: Any) -> OracleSpec:
    if isinstance(data, str):
        data = {"kind": data}
    if not isinstance(data, Mapping):
        raise ConfigError("reward_oracle must be an object", "reward_oracle", data)
    unknown = sorted(set(data) - _ORACLE_FIELDS)
    if unknown:
        raise ConfigError(f"unknown reward_oracle key {unknown[0]!r}", f"reward_oracle.{unknown[0]}", None)
    return OracleSpec(**data)


def config_from_dict(data: Mapping[str, Any]) -> ExperimentConfig:
    unknown = sorted(set(data) - _CONFIG_FIELDS)
    if unknown:
        raise ConfigError(f"unknown config key {unknown[0]!r}", unknown[0], None)
    kwargs = dict(data)
    if "policy" in kwargs:
        kwargs["policy"] = Policy.parse(kwargs["policy"])
    if "reward_oracle" in kwargs:
        kwargs["reward_oracle"] = _oracle_from_mapping(kwargs["reward_oracle"])
    return ExperimentConfig(**kwargs)


def load_config(source: str) -> ExperimentConfig:
    """Parse a JSON key/value document; absent keys keep their defaults.

    An empty (or whitespace-only) document yields the default config.
    """
    if not source.strip():
        return ExperimentConfig()
    try:
        data = json.loads(source)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config does not parse: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config document must be a key/value object")
    return config_from_dict(data)


def stream_seed(seed: int, profile_id: str, purpose: Purpose | str) -> int:
    """Hash (seed, profile_id, purpose) into a 64-bit substream seed."""
    purpose = Purpose(purpose).value
    payload = f"{seed}\x1f{profile_id}\x1f{purpose}".encode("utf-8")
    return int.from_bytes(hashlib.blake2b(payload, digest_size=8).digest(), "little")


def derive_rng_stream(config: ExperimentConfig, profile_id: str, purpose: Purpose | str) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(stream_seed(config.seed, profile_id, purpose)))
