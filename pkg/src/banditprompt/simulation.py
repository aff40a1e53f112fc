"""Per-profile online loop, baselines, trajectory export and aggregation."""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Mapping, Optional, Sequence

import numpy as np

from . import bandit
from .config import ExperimentConfig, Policy, Purpose, derive_rng_stream, stream_seed
from .errors import ServiceError
from .projection import ProjectionSpec, as_token_rows, make_projection, project
from .reward import (
    SyntheticLandscape,
    UserProfile,
    avg_rouge_reward,
    make_landscape,
    synthetic_reward,
)
from .service import remote_generate

ZERO_SHOT = "ZeroShot"

SYNTHETIC_SUITES = {"small": 3, "standard": 20}


@dataclass
class TrajectoryRecord:
    t: int
    latent: np.ndarray
    reward: float
    best_so_far: float


@dataclass
class Trajectory:
    profile_id: str
    policy: str
    config_fingerprint: str
    records: List[TrajectoryRecord] = field(default_factory=list)

    def append(self, latent, reward: float):
        best = reward if not self.records else max(self.records[-1].best_so_far, reward)
        self.records.append(TrajectoryRecord(len(self.records), np.asarray(latent, dtype=float), float(reward), best))

    @property
    def rewards(self) -> List[float]:
        return [r.reward for r in self.records]

    @property
    def best_curve(self) -> List[float]:
        return [r.best_so_far for r in self.records]

    @property
    def final_best(self) -> float:
        return self.records[-1].best_so_far

    def __len__(self):
        return len(self.records)

    def csv_text(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["t", "reward", "best_so_far"])
        for rec in self.records:
            writer.writerow([rec.t, repr(rec.reward), repr(rec.best_so_far)])
        return buf.getvalue()

    def write_csv(self, path) -> None:
        Path(path).write_text(self.csv_text(), encoding="utf-8")


def best_so_far(rewards: Sequence[float]) -> List[float]:
    out, best = [], -np.inf
    for r in rewards:
        best = max(best, r)
        out.append(best)
    return out


class SyntheticOracle:
    """Hidden landscape over the latent (or over the projected prompt)."""

    textual = False

    def __init__(self, landscape: SyntheticLandscape, projection: Optional[ProjectionSpec] = None):
        if landscape.compose_projection and projection is None:
            raise ValueError("a composed landscape needs a projection")
        self.landscape = landscape
        self.projection = projection

    def __call__(self, t: int, latent) -> float:
        if self.landscape.compose_projection:
            return synthetic_reward(self.landscape, project(self.projection, latent))
        return synthetic_reward(self.landscape, latent)


class TextOracle:
    """Generate through a remote service and score against the scheduled gold."""

    textual = True

    def __init__(
        self,
        profile: UserProfile,
        config: ExperimentConfig,
        projection: ProjectionSpec,
        generate: Callable[..., str] = remote_generate,
    ):
        spec = config.reward_oracle
        if spec.endpoint is None:
            raise ValueError("a ROUGE oracle needs a generation endpoint")
        self.profile = profile
        self.config = config
        self.projection = projection
        self.generate = generate

    def _score(self, t: int, prompt: np.ndarray) -> float:
        spec = self.config.reward_oracle
        rows = as_token_rows(prompt, self.config.num_soft_tokens, self.config.token_dim)
        input_text, gold = self.profile.example_at(t)
        text = self.generate(spec.endpoint, rows, spec.instruction, input_text, spec.timeout)
        return avg_rouge_reward(text, gold)

    def __call__(self, t: int, latent) -> float:
        return self._score(t, project(self.projection, latent))

    def zero_shot(self, t: int) -> float:
        return self._score(t, np.zeros(self.config.prompt_dim))


def build_oracle(profile: UserProfile, config: ExperimentConfig):
    """Default oracle for a profile, drawn from its Projection/Oracle substreams."""
    spec = config.reward_oracle
    if spec.kind == "rouge":
        proj = make_projection(config.prompt_dim, config.intrinsic_dim, derive_rng_stream(config, profile.id, Purpose.PROJECTION))
        return TextOracle(profile, config, proj)
    rng = derive_rng_stream(config, profile.id, Purpose.ORACLE)
    if spec.compose_projection:
        proj = make_projection(config.prompt_dim, config.intrinsic_dim, derive_rng_stream(config, profile.id, Purpose.PROJECTION))
        optimum = project(proj, rng.uniform(-1.0, 1.0, size=config.intrinsic_dim))
        landscape = make_landscape(spec.rank, config.prompt_dim, spec.temperature, rng, True, optimum)
        return SyntheticOracle(landscape, proj)
    return SyntheticOracle(make_landscape(spec.rank, config.intrinsic_dim, spec.temperature, rng))


def _call_oracle(oracle, t: int, *args) -> float:
    try:
        return oracle(t, *args)
    except ServiceError as exc:
        exc.iteration = t
        raise


def run_online(profile: UserProfile, config: ExperimentConfig, oracle=None) -> Trajectory:
    """Select, evaluate, observe and update for ``config.total_iterations`` rounds."""
    if oracle is None:
        oracle = build_oracle(profile, config)
    policy = config.policy
    cand_seed = stream_seed(config.seed, profile.id, Purpose.CANDIDATES)
    policy_rng = derive_rng_stream(config, profile.id, Purpose.POLICY)
    state = None
    if policy is not Policy.RANDOM_SEARCH:
        state = bandit.new_state(config, derive_rng_stream(config, profile.id, Purpose.SURROGATE))
    traj = Trajectory(profile.id, policy.value, config.fingerprint())
    for t in range(config.total_iterations):
        pool = bandit.gen_candidates(config, cand_seed, t)
        if state is not None:
            state.nu = config.nu_at(t)
        _, latent = bandit.select_next(state, pool, policy, policy_rng)
        reward = _call_oracle(oracle, t, latent)
        if state is not None:
            state = bandit.update_posterior(state, latent, reward)
        traj.append(latent, reward)
    return traj


def run_baseline(profile: UserProfile, config: ExperimentConfig, oracle=None) -> Trajectory:
    """Zero-shot (zero soft prompt) for text oracles; RandomSearch for synthetic ones."""
    if oracle is None:
        oracle = build_oracle(profile, config)
    if not oracle.textual:
        return run_online(profile, config.replace(policy=Policy.RANDOM_SEARCH), oracle)
    traj = Trajectory(profile.id, ZERO_SHOT, config.fingerprint())
    zero = np.zeros(config.intrinsic_dim)
    for t in range(config.total_iterations):
        traj.append(zero, _call_oracle(oracle.zero_shot, t))
    return traj


def synthetic_profiles(suite_id: str) -> List[UserProfile]:
    try:
        n = SYNTHETIC_SUITES[suite_id]
    except KeyError:
        raise ValueError(f"unknown synthetic suite {suite_id!r}; choose from {sorted(SYNTHETIC_SUITES)}") from None
    return [
        UserProfile(f"{suite_id}-{i:03d}", (("", ""),), persona="synthetic preference landscape")
        for i in range(n)
    ]


@dataclass
class GroupStats:
    mean: float
    std: float
    n: int


@dataclass
class AggregateReport:
    policies: Dict[str, GroupStats]
    baseline: GroupStats
    best_policy: str
    improvement_pct: float

    def to_dict(self) -> dict:
        return {
            "policies": {k: vars(v) for k, v in self.policies.items()},
            "baseline": vars(self.baseline),
            "best_policy": self.best_policy,
            "improvement_pct": self.improvement_pct,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _group_stats(name: str, trajs: Sequence[Trajectory]) -> GroupStats:
    if not trajs:
        raise ValueError(f"group {name!r} is empty")
    finals = np.array([tr.final_best for tr in trajs])
    return GroupStats(float(finals.mean()), float(finals.std()), len(finals))


def aggregate(groups: Mapping[str, Sequence[Trajectory]], baseline: Sequence[Trajectory]) -> AggregateReport:
    """Mean and population std of final best-so-far per group.

    The improvement is measured from the best bandit group (NeuralUCB or
    NeuralTS when present, otherwise every non-baseline group) against the
    baseline mean, in percent.
    """
    if not groups:
        raise ValueError("no policy groups to aggregate")
    lengths = {len(tr) for trajs in list(groups.values()) + [baseline] for tr in trajs}
    if len(lengths) > 1:
        raise ValueError(f"trajectories disagree on length: {sorted(lengths)}")
    stats = {name: _group_stats(name, trajs) for name, trajs in groups.items()}
    base = _group_stats("baseline", baseline)
    bandits = [n for n in stats if n in (Policy.NEURAL_UCB.value, Policy.NEURAL_TS.value)] or list(stats)
    best = max(bandits, key=lambda n: stats[n].mean)
    if base.mean == 0:
        delta = 0.0 if stats[best].mean == 0 else float("inf")
    else:
        delta = (stats[best].mean - base.mean) / base.mean * 100.0
    return AggregateReport(stats, base, best, float(delta))


def run_suite(
    profiles: Sequence[UserProfile],
    config: ExperimentConfig,
    policies: Sequence[Policy],
    oracle_factory: Callable[[UserProfile, ExperimentConfig], object] = build_oracle,
    jobs: int = 1,
):
    """Run every profile under every policy plus the baseline.

    Returns ``(groups, baseline)``. Profiles are independent, so ``jobs > 1``
    gives the same results as a serial run.
    """

    def one(profile):
        oracle = oracle_factory(profile, config)
        runs = {p.value: run_online(profile, config.replace(policy=p), oracle) for p in policies}
        return runs, run_baseline(profile, config, oracle)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(one, profiles))
    else:
        results = [one(p) for p in profiles]
    groups = {p.value: [r[0][p.value] for r in results] for p in policies}
    return groups, [r[1] for r in results]
