"""Stationary action profiles and their construction from credibility curves.

A profile assigns each owned source a probability of sharing factual
items, ordered centrist first (increasing |y|). Under the credibility
update, a source's long-run average credibility converges to its factual
probability, so a profile doubles as a stationary credibility target.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import default_source_opinions, owned_source_indices

__all__ = [
    "StrategyProfile",
    "CredibilityCurveRecord",
    "profile_library",
    "load_credibility_curve",
    "load_profile_file",
    "profile_probs_global",
    "sample_actions",
]


@dataclass(frozen=True)
class StrategyProfile:
    """Per-source factual probabilities for one player, centrist first."""

    name: str
    factual_prob: np.ndarray

    def __post_init__(self) -> None:
        p = np.asarray(self.factual_prob, dtype=float)
        object.__setattr__(self, "factual_prob", p)
        if p.ndim != 1 or p.size < 1:
            raise ValueError("factual_prob must be a nonempty vector")
        if np.any(p < 0.0) or np.any(p > 1.0):
            raise ValueError("factual probabilities must lie in [0, 1]")

    @property
    def mean_factual_prob(self) -> float:
        return float(self.factual_prob.mean())


@dataclass(frozen=True)
class CredibilityCurveRecord:
    """One point of a credibility-vs-bias curve."""

    bias: float
    credibility: float

    def __post_init__(self) -> None:
        if not (np.isfinite(self.bias) and np.isfinite(self.credibility)):
            raise ValueError("bias and credibility must be finite")
        if not 0.0 <= self.credibility <= 1.0:
            raise ValueError("credibility must lie in [0, 1]")


# Nine stationary profiles per side, centrist source first. Values span the
# qualitative families (all-factual, radical-misinform of increasing depth,
# all-misinform, uniform, inverted, step); they are configurable defaults,
# not measured policies.
_LIBRARY = (
    ("P1", (1.0, 1.0, 1.0, 1.0, 1.0)),
    ("P2", (1.0, 1.0, 1.0, 0.8, 0.6)),
    ("P3", (1.0, 0.95, 0.85, 0.6, 0.3)),
    ("P4", (1.0, 0.9, 0.6, 0.3, 0.1)),
    ("P5", (0.0, 0.0, 0.0, 0.0, 0.0)),
    ("P6", (0.5, 0.5, 0.5, 0.5, 0.5)),
    ("P7", (0.3, 0.6, 0.85, 0.95, 1.0)),
    ("P8", (0.1, 0.3, 0.6, 0.9, 1.0)),
    ("P9", (1.0, 1.0, 0.0, 0.0, 0.0)),
)


def profile_library() -> list[StrategyProfile]:
    """The nine default stationary profiles (five sources per side)."""
    return [StrategyProfile(name=n, factual_prob=np.array(p)) for n, p in _LIBRARY]


def load_credibility_curve(
    rows: list[CredibilityCurveRecord],
    source_opinions: Optional[np.ndarray] = None,
) -> tuple[StrategyProfile, StrategyProfile]:
    """Profiles for both players from a credibility-vs-bias curve.

    Each owned source opinion is assigned the piecewise-linear
    interpolation of credibility over bias, clamped to [0, 1].
    """
    if source_opinions is None:
        source_opinions = default_source_opinions(10)
    y = np.asarray(source_opinions, dtype=float)
    if any(not isinstance(r, CredibilityCurveRecord) for r in rows):
        rows = [CredibilityCurveRecord(bias=b, credibility=c) for b, c in rows]
    n_neg = sum(1 for r in rows if r.bias < 0)
    n_pos = sum(1 for r in rows if r.bias > 0)
    if len(rows) - n_pos < 2 or len(rows) - n_neg < 2:
        raise ValueError("need at least 2 curve records on each side of the bias axis")
    pts = sorted(rows, key=lambda r: r.bias)
    bias = np.array([r.bias for r in pts])
    cred = np.array([r.credibility for r in pts])
    probs = np.clip(np.interp(y, bias, cred), 0.0, 1.0)
    left, right = owned_source_indices(y)
    return (
        StrategyProfile(name="curve-L", factual_prob=probs[left]),
        StrategyProfile(name="curve-R", factual_prob=probs[right]),
    )


def load_profile_file(path: str) -> dict[str, StrategyProfile]:
    """Profiles from a JSON file mapping name -> probability list."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise ValueError("profile file must map names to probability lists")
    return {name: StrategyProfile(name=name, factual_prob=np.asarray(probs, dtype=float)) for name, probs in raw.items()}


def profile_probs_global(profile_L: StrategyProfile, profile_R: StrategyProfile) -> np.ndarray:
    """Factual probabilities in global source order (ascending opinion).

    Sources are laid out ascending in y, so L's block runs radical to
    centrist and R's block centrist to radical; L's profile is reversed
    to match.
    """
    return np.concatenate([profile_L.factual_prob[::-1], profile_R.factual_prob])


def sample_actions(
    profile_L: StrategyProfile,
    profile_R: StrategyProfile,
    rng: np.random.Generator,
) -> np.ndarray:
    """One joint action draw: independent Bernoulli per source, global order."""
    probs = profile_probs_global(profile_L, profile_R)
    return (rng.random(probs.size) < probs).astype(int)
