"""Reward oracles: ROUGE-1/L scoring, synthetic landscapes, user profiles."""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import DataError

_ALNUM_RUN = re.compile(r"[^\W_]+")


def tokenize(text: str) -> List[str]:
    """Lowercase and split on runs of non-alphanumeric characters."""
    return _ALNUM_RUN.findall(text.lower())


@dataclass(frozen=True)
class RougeScore:
    precision: float
    recall: float
    f1: float

    @classmethod
    def from_counts(cls, match: int, n_cand: int, n_ref: int) -> "RougeScore":
        p = match / n_cand if n_cand else 0.0
        r = match / n_ref if n_ref else 0.0
        f = 2 * p * r / (p + r) if p + r > 0 else 0.0
        return cls(p, r, f)


def rouge1(candidate: Sequence[str], reference: Sequence[str]) -> RougeScore:
    overlap = Counter(candidate) & Counter(reference)
    return RougeScore.from_counts(sum(overlap.values()), len(candidate), len(reference))


def lcs_length(a: Sequence, b: Sequence) -> int:
    """Longest common subsequence length, O(len(a) * len(b)) two-row DP."""
    if len(a) < len(b):
        a, b = b, a
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b):
            cur.append(prev[j] + 1 if x == y else max(prev[j + 1], cur[j]))
        prev = cur
    return prev[-1]


def rougeL(candidate: Sequence[str], reference: Sequence[str]) -> RougeScore:
    return RougeScore.from_counts(lcs_length(candidate, reference), len(candidate), len(reference))


def avg_rouge_reward(generated: str, gold: str) -> float:
    """Mean of ROUGE-1 F1 and ROUGE-L F1 on tokenized text."""
    cand, ref = tokenize(generated), tokenize(gold)
    return 0.5 * (rouge1(cand, ref).f1 + rougeL(cand, ref).f1)


@dataclass(frozen=True)
class SyntheticLandscape:
    """Hidden preference ``r(z) = exp(-||B z - w||^2 / temperature)``.

    With ``compose_projection`` the landscape lives on the projected soft
    prompt, so B has one column per full-prompt coordinate.
    """

    B: np.ndarray
    w: np.ndarray
    temperature: float
    compose_projection: bool = False

    def __post_init__(self):
        if self.B.ndim != 2 or self.w.shape != (self.B.shape[0],):
            raise ValueError("landscape needs B of shape (k, n) and w of shape (k,)")
        if not self.temperature > 0:
            raise ValueError("temperature must be positive")


def make_landscape(
    rank: int,
    dim: int,
    temperature: float,
    rng: np.random.Generator,
    compose_projection: bool = False,
    optimum: Optional[np.ndarray] = None,
) -> SyntheticLandscape:
    """Random landscape whose optimum sits at a point of [-1, 1]^dim.

    Rows of B are Gaussian with variance 1/dim so ``||B z||`` stays O(1)
    over the box; w = B z* for a hidden optimum z*. Pass ``optimum`` to pin
    z* (e.g. a projected latent when composing with a projection).
    """
    B = rng.normal(0.0, 1.0 / np.sqrt(dim), size=(rank, dim))
    z_star = rng.uniform(-1.0, 1.0, size=dim) if optimum is None else np.asarray(optimum, dtype=float)
    return SyntheticLandscape(B, B @ z_star, float(temperature), compose_projection)


def synthetic_reward(landscape: SyntheticLandscape, latent) -> float:
    z = np.asarray(latent, dtype=float)
    if z.shape != (landscape.B.shape[1],):
        raise ValueError(f"latent has shape {z.shape}, landscape expects ({landscape.B.shape[1]},)")
    gap = landscape.B @ z - landscape.w
    return float(np.exp(-(gap @ gap) / landscape.temperature))


@dataclass(frozen=True)
class UserProfile:
    id: str
    examples: Tuple[Tuple[str, str], ...]
    persona: Optional[str] = None

    def example_at(self, t: int) -> Tuple[str, str]:
        """The (input, gold) pair scheduled for iteration ``t`` (cyclic)."""
        return self.examples[t % len(self.examples)]


def profile_from_record(record, index: int) -> UserProfile:
    if not isinstance(record, dict):
        raise DataError(f"profile record {index}: expected an object", index)
    pid = record.get("id")
    if not isinstance(pid, str) or not pid:
        raise DataError(f"profile record {index}: field 'id' must be a nonempty string", index, "id")
    persona = record.get("persona")
    if persona is not None and not isinstance(persona, str):
        raise DataError(f"profile record {index}: field 'persona' must be a string", index, "persona")
    examples = record.get("examples")
    if not isinstance(examples, list) or not examples:
        raise DataError(f"profile record {index}: field 'examples' must be a nonempty array", index, "examples")
    pairs = []
    for j, ex in enumerate(examples):
        if not isinstance(ex, dict) or not isinstance(ex.get("input"), str) or not isinstance(ex.get("gold"), str):
            raise DataError(
                f"profile record {index}: examples[{j}] needs string 'input' and 'gold'", index, "examples"
            )
        pairs.append((ex["input"], ex["gold"]))
    return UserProfile(pid, tuple(pairs), persona)


def load_profiles(path) -> List[UserProfile]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise DataError(f"profile file not found: {path}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataError(f"profile file does not parse: {exc}") from exc
    if not isinstance(data, list):
        raise DataError("profile file must hold an array of records")
    return [profile_from_record(rec, i) for i, rec in enumerate(data)]


def save_profiles(profiles: Sequence[UserProfile], path) -> None:
    records = []
    for p in profiles:
        rec = {"id": p.id}
        if p.persona is not None:
            rec["persona"] = p.persona
        rec["examples"] = [{"input": x, "gold": y} for x, y in p.examples]
        records.append(rec)
    Path(path).write_text(json.dumps(records, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
