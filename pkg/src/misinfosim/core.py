"""Domain types, parameter defaults, and the seeded randomness contract.

Everything downstream (dynamics, payoff estimation, sweeps) builds on the
types and helpers here. All randomness flows through `substream`, which
derives independent generators from one root seed by stable hashing, so
results never depend on scheduling or worker count.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, asdict

import numpy as np

__all__ = [
    "ModelParams",
    "PopulationState",
    "SourceState",
    "SimulationConfig",
    "Trajectory",
    "default_params",
    "default_config",
    "sample_susceptibilities",
    "init_population",
    "default_source_opinions",
    "owned_source_indices",
    "substream",
    "derive_seed",
    "config_digest",
]


# ---------------------------------------------------------------------------
# Parameter and state types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ModelParams:
    """Scalar parameters of the opinion/credibility dynamics and reward.

    `lam` is the credibility memory (serialized as "lambda"); `eta` the
    misinformation gain; `xi` the credibility gain; `kappa`/`kappa_hat`
    the individual-individual and source-individual decay rates.
    """

    eta: float = 1.0
    xi: float = 2.0
    kappa: float = 20.0
    kappa_hat: float = 5.0
    lam: float = 0.95
    h: float = 0.1
    sigma: float = 0.1 * math.sqrt(0.1)
    varpi: float = math.pi / 2.0
    vartheta: int = 5
    gamma: float = 0.99
    x_min: float = -1.0
    x_max: float = 1.0

    def __post_init__(self) -> None:
        if self.eta < 0 or self.xi < 0:
            raise ValueError("eta and xi must be >= 0")
        if self.kappa <= 0 or self.kappa_hat <= 0:
            raise ValueError("kappa and kappa_hat must be > 0")
        if not 0.0 < self.lam < 1.0:
            raise ValueError("lam must lie in (0, 1)")
        if self.h <= 0:
            raise ValueError("h must be > 0")
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")
        if not isinstance(self.vartheta, int) or self.vartheta < 1:
            raise ValueError("vartheta must be a positive integer")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must lie in (0, 1)")
        if self.x_min >= self.x_max:
            raise ValueError("x_min must be < x_max")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelParams":
        d = dict(d)
        if "lambda" in d:
            d["lam"] = d.pop("lambda")
        if "vartheta" in d:
            d["vartheta"] = int(d["vartheta"])
        return cls(**d)


@dataclass(frozen=True)
class PopulationState:
    """Opinions and susceptibilities of N individuals at one time step."""

    opinions: np.ndarray
    susceptibilities: np.ndarray

    def __post_init__(self) -> None:
        x = np.asarray(self.opinions, dtype=float)
        s = np.asarray(self.susceptibilities, dtype=float)
        object.__setattr__(self, "opinions", x)
        object.__setattr__(self, "susceptibilities", s)
        if x.ndim != 1 or s.ndim != 1 or x.shape != s.shape or x.size < 1:
            raise ValueError("opinions and susceptibilities must be equal-length 1-d vectors")
        if np.any(s < 0.0) or np.any(s > 1.0):
            raise ValueError("susceptibilities must lie in [0, 1]")

    @property
    def n(self) -> int:
        return self.opinions.size


@dataclass(frozen=True)
class SourceState:
    """Fixed source opinions with evolving credibilities and current actions."""

    source_opinions: np.ndarray
    credibilities: np.ndarray
    actions: np.ndarray

    def __post_init__(self) -> None:
        y = np.asarray(self.source_opinions, dtype=float)
        c = np.asarray(self.credibilities, dtype=float)
        a = np.asarray(self.actions, dtype=int)
        object.__setattr__(self, "source_opinions", y)
        object.__setattr__(self, "credibilities", c)
        object.__setattr__(self, "actions", a)
        if not (y.ndim == c.ndim == a.ndim == 1 and y.shape == c.shape == a.shape):
            raise ValueError("source_opinions, credibilities, actions must be equal-length 1-d vectors")
        if np.any(c < 0.0) or np.any(c > 1.0):
            raise ValueError("credibilities must lie in [0, 1]")
        if not np.all((a == 0) | (a == 1)):
            raise ValueError("actions must be binary")

    @property
    def m(self) -> int:
        return self.source_opinions.size


@dataclass(frozen=True)
class SimulationConfig:
    """Shape of one simulation: population size, horizon, and parameters."""

    n_individuals: int = 500
    n_sources: int = 10
    horizon_T: int = 200
    beta1: float = 3.0
    beta2: float = 2.0
    n_bins_l: int = 20
    seed: int = 0
    params: ModelParams = field(default_factory=ModelParams)

    def __post_init__(self) -> None:
        if self.n_individuals < 1:
            raise ValueError("n_individuals must be >= 1")
        if self.n_sources < 2 or self.n_sources % 2 != 0:
            raise ValueError("n_sources must be even and >= 2")
        if self.horizon_T < 1:
            raise ValueError("horizon_T must be >= 1")
        if self.beta1 < 1 or self.beta2 < 1:
            raise ValueError("beta1 and beta2 must be >= 1")
        if self.n_bins_l < 2:
            raise ValueError("n_bins_l must be >= 2")

    def to_dict(self) -> dict:
        return {
            "n_individuals": self.n_individuals,
            "n_sources": self.n_sources,
            "horizon_T": self.horizon_T,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "n_bins_l": self.n_bins_l,
            "seed": self.seed,
            "params": self.params.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SimulationConfig":
        d = dict(d)
        params = d.pop("params", None)
        if params is not None:
            d["params"] = ModelParams.from_dict(params)
        for key in ("n_individuals", "n_sources", "horizon_T", "n_bins_l", "seed"):
            if key in d:
                d[key] = int(d[key])
        return cls(**d)


@dataclass(frozen=True)
class Trajectory:
    """Full history of one rollout: opinions, credibilities, actions."""

    opinion_history: np.ndarray       # (T+1, N)
    credibility_history: np.ndarray   # (T+1, M)
    action_history: np.ndarray        # (T, M), binary
    susceptibilities: np.ndarray      # (N,)

    def __post_init__(self) -> None:
        x = np.asarray(self.opinion_history, dtype=float)
        c = np.asarray(self.credibility_history, dtype=float)
        a = np.asarray(self.action_history, dtype=int)
        s = np.asarray(self.susceptibilities, dtype=float)
        object.__setattr__(self, "opinion_history", x)
        object.__setattr__(self, "credibility_history", c)
        object.__setattr__(self, "action_history", a)
        object.__setattr__(self, "susceptibilities", s)
        if x.ndim != 2 or c.ndim != 2 or a.ndim != 2 or s.ndim != 1:
            raise ValueError("history arrays have wrong rank")
        if x.shape[0] != c.shape[0] or x.shape[0] != a.shape[0] + 1:
            raise ValueError("histories must span T+1 states and T action steps")
        if c.shape[1] != a.shape[1]:
            raise ValueError("credibility and action histories disagree on M")
        if s.shape[0] != x.shape[1]:
            raise ValueError("susceptibilities length must match N")

    @property
    def horizon(self) -> int:
        return self.action_history.shape[0]

    @property
    def n(self) -> int:
        return self.opinion_history.shape[1]

    @property
    def m(self) -> int:
        return self.credibility_history.shape[1]


# ---------------------------------------------------------------------------
# Defaults and initialization
# ---------------------------------------------------------------------------

def default_params() -> ModelParams:
    """Default dynamics parameters."""
    return ModelParams()


def default_config(seed: int = 0) -> SimulationConfig:
    """Default simulation shape: 500 individuals, 10 sources, 200 steps."""
    return SimulationConfig(seed=seed)


def sample_susceptibilities(n: int, beta1: float, beta2: float, rng: np.random.Generator) -> np.ndarray:
    """Draw n i.i.d. Beta(beta1, beta2) susceptibilities in [0, 1]."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if beta1 < 1 or beta2 < 1:
        raise ValueError("beta1 and beta2 must be >= 1")
    return rng.beta(beta1, beta2, size=n)


def init_population(config: SimulationConfig, rng: np.random.Generator) -> PopulationState:
    """Uniform initial opinions on [x_min, x_max] plus Beta susceptibilities.

    Draw order (opinions first, then susceptibilities) is part of the
    reproducibility contract and must not change.
    """
    p = config.params
    opinions = rng.uniform(p.x_min, p.x_max, size=config.n_individuals)
    suscept = sample_susceptibilities(config.n_individuals, config.beta1, config.beta2, rng)
    return PopulationState(opinions=opinions, susceptibilities=suscept)


def default_source_opinions(m: int, x_min: float = -1.0, x_max: float = 1.0) -> np.ndarray:
    """Evenly spaced source opinions, mirror-symmetric about the center, zero excluded.

    For m=10 on [-1, 1]: -0.9, -0.7, ..., -0.1, 0.1, ..., 0.9.
    """
    if m < 2 or m % 2 != 0:
        raise ValueError("m must be even and >= 2")
    half = m // 2
    center = 0.5 * (x_min + x_max)
    half_range = 0.5 * (x_max - x_min)
    offsets = (2.0 * np.arange(1, half + 1) - 1.0) / (2.0 * half) * half_range
    return np.concatenate([center - offsets[::-1], center + offsets])


def owned_source_indices(source_opinions: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split source indices by owner: L takes y < 0, R takes y > 0.

    Each side is ordered centrist first (increasing |y|), matching the
    ordering of StrategyProfile probabilities.
    """
    y = np.asarray(source_opinions, dtype=float)
    if np.any(y == 0.0):
        raise ValueError("source opinions must be nonzero so each source has an owner")
    left = np.flatnonzero(y < 0.0)
    right = np.flatnonzero(y > 0.0)
    left = left[np.argsort(np.abs(y[left]), kind="stable")]
    right = right[np.argsort(np.abs(y[right]), kind="stable")]
    return left, right


# ---------------------------------------------------------------------------
# Randomness contract
# ---------------------------------------------------------------------------

def substream(root_seed: int, label: str, *indices: int) -> np.random.Generator:
    """Generator for one task, derived from the root seed and a stable key.

    The key is hashed with sha256 (never Python's salted hash()), so the
    same (seed, label, indices) gives the same stream in every process.
    """
    key = ":".join([label, *[str(int(i)) for i in indices]]).encode("utf-8")
    digest = hashlib.sha256(key).digest()
    words = [int.from_bytes(digest[k : k + 4], "little") for k in range(0, 16, 4)]
    seq = np.random.SeedSequence([int(root_seed) & 0xFFFFFFFFFFFFFFFF, *words])
    return np.random.default_rng(seq)


def derive_seed(root_seed: int, label: str, *indices: int) -> int:
    """A 63-bit child seed from the root seed and a stable key.

    Used where a task needs its own root (e.g. one sweep cell) rather
    than a generator.
    """
    key = ":".join([str(int(root_seed) & 0xFFFFFFFFFFFFFFFF), label, *[str(int(i)) for i in indices]])
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little") >> 1


def config_digest(config: SimulationConfig) -> str:
    """Stable hex digest of a config, for artifact metadata."""
    blob = json.dumps(config.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()
