"""Simulation engine: interaction kernels, update rules, and rollouts.

The social force uses a sort + prefix/suffix cumulative-sum identity for
the exponential kernel, which turns the O(N^2) pairwise sum into
O(N log N) and is what makes Monte-Carlo payoff estimation tractable.
The naive pairwise form is kept in the test suite as the oracle.

`run_batch` advances many independent rollouts in lock step with one
vectorized state. Each rollout owns its generator and consumes draws in
a canonical order (init opinions, susceptibilities, then per step: action
uniforms followed by noise normals), so batched results are bitwise equal
to one-at-a-time `simulate` calls.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import (
    ModelParams,
    PopulationState,
    SimulationConfig,
    SourceState,
    Trajectory,
    default_source_opinions,
    init_population,
)
from .strategies import StrategyProfile, profile_probs_global

__all__ = [
    "Observation",
    "social_kernel",
    "misinfo_factor",
    "credibility_factor",
    "media_kernel",
    "credibility_step",
    "opinion_step",
    "discretize_opinions",
    "simulate",
    "BatchResult",
    "run_batch",
]


# ---------------------------------------------------------------------------
# Kernels
# ---------------------------------------------------------------------------

def social_kernel(r, kappa: float):
    """Individual-individual interaction weight exp(-kappa * r)."""
    return np.exp(-kappa * np.asarray(r, dtype=float))


def misinfo_factor(a, eta: float):
    """Decay multiplier f(a) = 1 + eta*a; factual items decay faster."""
    return 1.0 + eta * np.asarray(a, dtype=float)


def credibility_factor(c, s, xi: float):
    """Decay multiplier g(c, s) = 1 + xi*(1-c)*(1-s).

    Low credibility shortens a source's reach, but only for individuals
    who are not fully susceptible (s < 1).
    """
    c = np.asarray(c, dtype=float)
    s = np.asarray(s, dtype=float)
    return 1.0 + xi * (1.0 - c) * (1.0 - s)


def media_kernel(r, c, a, s, params: ModelParams):
    """Source-individual weight exp(-kappa_hat * f(a) * g(c, s) * r)."""
    rate = params.kappa_hat * misinfo_factor(a, params.eta) * credibility_factor(c, s, params.xi)
    return np.exp(-rate * np.asarray(r, dtype=float))


# ---------------------------------------------------------------------------
# Update rules
# ---------------------------------------------------------------------------

def credibility_step(c: np.ndarray, actions: np.ndarray, lam: float) -> np.ndarray:
    """Convex credibility update lam*c + (1-lam)*a, elementwise."""
    return lam * np.asarray(c, dtype=float) + (1.0 - lam) * np.asarray(actions, dtype=float)


def _social_drift(x: np.ndarray, kappa: float) -> np.ndarray:
    """Normalized social force for each row of x: sum_j phi*(xj-xi) / sum_j phi.

    Sorting each row makes |xi-xj| split into (xi-xj) on one side and
    (xj-xi) on the other, so both the normalizer and the force reduce to
    prefix/suffix sums of exp(+-kappa*x). Exponents are centered on the
    row midrange to keep them small; the products are unchanged.
    """
    order = np.argsort(x, axis=1, kind="stable")
    xs = np.take_along_axis(x, order, axis=1)
    mid = 0.5 * (xs[:, :1] + xs[:, -1:])
    z = xs - mid
    epos = np.exp(kappa * z)
    eneg = np.exp(-kappa * z)
    cu = np.cumsum(epos, axis=1)
    cv = np.cumsum(epos * xs, axis=1)
    sp = np.cumsum(eneg[:, ::-1], axis=1)[:, ::-1]
    sq = np.cumsum((eneg * xs)[:, ::-1], axis=1)[:, ::-1]
    # self term appears in both the prefix and the suffix; drop one copy
    norm = eneg * cu + epos * sp - 1.0
    force = eneg * (cv - xs * cu) + epos * (sq - xs * sp)
    drift_sorted = force / norm
    drift = np.empty_like(x)
    np.put_along_axis(drift, order, drift_sorted, axis=1)
    return drift


def _media_drift(
    x: np.ndarray,
    y: np.ndarray,
    c: np.ndarray,
    a: np.ndarray,
    s: np.ndarray,
    params: ModelParams,
) -> np.ndarray:
    """Normalized media force for each row: sum_m psi*(ym-xi) / sum_m psi."""
    rate = params.kappa_hat * (1.0 + params.eta * a)[:, None, :] * (
        1.0 + params.xi * (1.0 - s)[:, :, None] * (1.0 - c)[:, None, :]
    )
    disp = y[None, None, :] - x[:, :, None]
    w = np.exp(-rate * np.abs(disp))
    norm = w.sum(axis=2)
    force = np.einsum("rnm,rnm->rn", w, disp)
    return force / norm


def _step_batch(
    x: np.ndarray,
    s: np.ndarray,
    y: np.ndarray,
    c: np.ndarray,
    a: np.ndarray,
    noise: np.ndarray,
    params: ModelParams,
) -> np.ndarray:
    """One Euler step of the opinion process for a batch of rollouts."""
    drift = params.h * _social_drift(x, params.kappa)
    drift += params.h * _media_drift(x, y, c, a, s, params)
    return np.clip(x + drift + params.sigma * noise, params.x_min, params.x_max)


def opinion_step(
    pop: PopulationState,
    src: SourceState,
    params: ModelParams,
    rng: np.random.Generator,
) -> np.ndarray:
    """Advance all opinions one step; draws N standard normals from rng."""
    noise = rng.standard_normal(pop.n)
    new_x = _step_batch(
        pop.opinions[None, :],
        pop.susceptibilities[None, :],
        src.source_opinions,
        src.credibilities[None, :].astype(float),
        src.actions[None, :].astype(float),
        noise[None, :],
        params,
    )
    return new_x[0]


def discretize_opinions(x: np.ndarray, l: int, x_min: float, x_max: float) -> np.ndarray:
    """Histogram of opinions over l equal-width bins, normalized to sum 1."""
    if l < 2:
        raise ValueError("l must be >= 2")
    counts, _ = np.histogram(np.asarray(x, dtype=float), bins=l, range=(x_min, x_max))
    return counts / np.asarray(x).size


@dataclass(frozen=True)
class Observation:
    """Public signal at one step: opinion histogram plus source credibilities."""

    histogram: np.ndarray
    credibilities: np.ndarray

    def __post_init__(self) -> None:
        z = np.asarray(self.histogram, dtype=float)
        c = np.asarray(self.credibilities, dtype=float)
        object.__setattr__(self, "histogram", z)
        object.__setattr__(self, "credibilities", c)
        if np.any(z < 0.0) or abs(z.sum() - 1.0) > 1e-9:
            raise ValueError("histogram must be a distribution")

    @classmethod
    def from_state(cls, opinions: np.ndarray, credibilities: np.ndarray, config: SimulationConfig) -> "Observation":
        p = config.params
        z = discretize_opinions(opinions, config.n_bins_l, p.x_min, p.x_max)
        return cls(histogram=z, credibilities=np.asarray(credibilities, dtype=float))


# ---------------------------------------------------------------------------
# Rollouts
# ---------------------------------------------------------------------------

@dataclass
class BatchResult:
    """Outputs of a batch of rollouts; history fields only when recorded."""

    returns: np.ndarray                       # (R,) discounted returns
    final_opinions: np.ndarray                # (R, N)
    susceptibilities: np.ndarray              # (R, N)
    exposure: Optional[np.ndarray] = None     # (R, N) mean misinformation contact
    opinion_history: Optional[np.ndarray] = None       # (R, T+1, N)
    credibility_history: Optional[np.ndarray] = None   # (R, T+1, M)
    action_history: Optional[np.ndarray] = None        # (R, T, M)


def run_batch(
    config: SimulationConfig,
    probs: np.ndarray,
    gens: Sequence[np.random.Generator],
    collect_exposure: bool = False,
    record_history: bool = False,
) -> BatchResult:
    """Run R independent rollouts in lock step.

    probs: per-source factual probabilities in global source order, either
    one vector of length M shared by all rollouts or an (R, M) array.
    gens: one generator per rollout, each consumed in the canonical order.
    """
    p = config.params
    n, m, horizon = config.n_individuals, config.n_sources, config.horizon_T
    r_count = len(gens)
    probs = np.broadcast_to(np.asarray(probs, dtype=float), (r_count, m))
    y = default_source_opinions(m, p.x_min, p.x_max)

    x = np.empty((r_count, n))
    s = np.empty((r_count, n))
    for r, g in enumerate(gens):
        x[r] = g.uniform(p.x_min, p.x_max, size=n)
        s[r] = g.beta(config.beta1, config.beta2, size=n)
    c = np.ones((r_count, m))

    returns = np.zeros(r_count)
    gamma_pow = p.gamma
    exposure = np.zeros((r_count, n)) if collect_exposure else None
    if record_history:
        xs_hist = np.empty((r_count, horizon + 1, n))
        c_hist = np.empty((r_count, horizon + 1, m))
        a_hist = np.empty((r_count, horizon, m), dtype=int)
        xs_hist[:, 0] = x
        c_hist[:, 0] = c

    u = np.empty((r_count, m))
    noise = np.empty((r_count, n))
    for t in range(horizon):
        for r, g in enumerate(gens):
            u[r] = g.random(m)
        a = (u < probs).astype(float)
        if collect_exposure:
            # plain exp(-kappa_hat * d) contact weight, actions paired with x_t
            contact = np.exp(-p.kappa_hat * np.abs(x[:, :, None] - y[None, None, :]))
            exposure += np.einsum("rnm,rm->rn", contact, 1.0 - a)
        for r, g in enumerate(gens):
            noise[r] = g.standard_normal(n)
        x = _step_batch(x, s, y, c, a, noise, p)
        c = credibility_step(c, a, p.lam)
        # reward of the post-step state x_k, discounted by gamma^k
        sin_x = np.sin(p.varpi * x)
        returns += gamma_pow * (-np.sum(sin_x**p.vartheta, axis=1))
        gamma_pow *= p.gamma
        if record_history:
            xs_hist[:, t + 1] = x
            c_hist[:, t + 1] = c
            a_hist[:, t] = a.astype(int)

    if collect_exposure:
        exposure /= horizon * m
    return BatchResult(
        returns=returns,
        final_opinions=x,
        susceptibilities=s,
        exposure=exposure,
        opinion_history=xs_hist if record_history else None,
        credibility_history=c_hist if record_history else None,
        action_history=a_hist if record_history else None,
    )


def simulate(
    config: SimulationConfig,
    policy_L: StrategyProfile,
    policy_R: StrategyProfile,
    rng: np.random.Generator,
) -> Trajectory:
    """Roll out one full trajectory under stationary action profiles.

    Credibilities start at 1; actions are sampled i.i.d. from the profiles
    each step; the full opinion/credibility/action history is recorded.
    """
    half = config.n_sources // 2
    if len(policy_L.factual_prob) != half or len(policy_R.factual_prob) != half:
        raise ValueError(f"profiles must each cover {half} sources")
    probs = profile_probs_global(policy_L, policy_R)
    out = run_batch(config, probs, [rng], record_history=True)
    return Trajectory(
        opinion_history=out.opinion_history[0],
        credibility_history=out.credibility_history[0],
        action_history=out.action_history[0],
        susceptibilities=out.susceptibilities[0],
    )
