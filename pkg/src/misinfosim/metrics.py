"""Scalar functionals over trajectories: exposure, reward, bimodality."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import stats

from .core import ModelParams, Trajectory, default_source_opinions

__all__ = [
    "MetricReport",
    "misinformation_exposure",
    "running_reward",
    "discounted_return",
    "bimodality",
    "build_metric_report",
]

# Bimodality of the uniform distribution; the conventional multimodality threshold.
BIMODALITY_THRESHOLD = 5.0 / 9.0


@dataclass(frozen=True)
class MetricReport:
    """Summary metrics of one trajectory."""

    exposure_per_individual: np.ndarray
    mean_exposure: float
    bimodality: float
    discounted_return: float

    def __post_init__(self) -> None:
        g = np.asarray(self.exposure_per_individual, dtype=float)
        object.__setattr__(self, "exposure_per_individual", g)
        if np.any(g < 0.0) or np.any(g > 1.0):
            raise ValueError("exposure values must lie in [0, 1]")
        if abs(self.mean_exposure - float(g.mean())) > 1e-9:
            raise ValueError("mean_exposure must equal the mean of the exposure vector")

    def to_dict(self) -> dict:
        return {
            "mean_exposure": self.mean_exposure,
            "bimodality": self.bimodality,
            "discounted_return": self.discounted_return,
            "exposure_per_individual": self.exposure_per_individual.tolist(),
        }


def misinformation_exposure(
    traj: Trajectory,
    kappa_hat: float,
    source_opinions: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Per-individual misinformation contact, averaged over time and sources.

    Each step t = 0..T-1 pairs the opinions at t with the actions taken at
    t; only misinformative actions (a=0) contribute, weighted by
    exp(-kappa_hat * distance). Values lie in [0, 1].
    """
    if source_opinions is None:
        source_opinions = default_source_opinions(traj.m)
    y = np.asarray(source_opinions, dtype=float)
    x = traj.opinion_history[:-1]                      # (T, N)
    misinfo = 1.0 - traj.action_history.astype(float)  # (T, M)
    contact = np.exp(-kappa_hat * np.abs(x[:, :, None] - y[None, None, :]))
    total = np.einsum("tnm,tm->n", contact, misinfo)
    return total / (traj.horizon * traj.m)


def running_reward(x: np.ndarray, varpi: float, vartheta: int) -> float:
    """Population reward -sum_i sin(varpi * x_i)^vartheta.

    Positive when opinion mass sits at negative opinions; for odd
    vartheta the reward is odd in x, which is what makes the two-player
    game zero-sum.
    """
    return float(-np.sum(np.sin(varpi * np.asarray(x, dtype=float)) ** vartheta))


def discounted_return(traj: Trajectory, params: ModelParams) -> float:
    """Discounted sum sum_{k=1..T} gamma^k * reward(x_k)."""
    rewards = -np.sum(np.sin(params.varpi * traj.opinion_history[1:]) ** params.vartheta, axis=1)
    discounts = params.gamma ** np.arange(1, traj.horizon + 1)
    return float(np.dot(discounts, rewards))


def bimodality(x: np.ndarray) -> float:
    """Bimodality coefficient (skew^2 + 1) / kurtosis with sample corrections.

    Uses bias-corrected sample skewness g3 and excess kurtosis g4:
    (g3^2 + 1) / (g4 + 3(N-1)^2 / ((N-2)(N-3))). Uniform data scores 5/9,
    normal 1/3, a symmetric two-point mass 1; above 5/9 reads as
    multimodal.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 4:
        raise ValueError("bimodality needs at least 4 observations")
    if np.var(x) == 0.0:
        raise ValueError("bimodality is undefined for zero-variance data")
    g3 = stats.skew(x, bias=False)
    g4 = stats.kurtosis(x, fisher=True, bias=False)
    return float((g3**2 + 1.0) / (g4 + 3.0 * (n - 1) ** 2 / ((n - 2) * (n - 3))))


def build_metric_report(traj: Trajectory, params: ModelParams) -> MetricReport:
    """Exposure, final-state bimodality, and discounted return of one trajectory."""
    exposure = misinformation_exposure(traj, params.kappa_hat)
    return MetricReport(
        exposure_per_individual=exposure,
        mean_exposure=float(exposure.mean()),
        bimodality=bimodality(traj.opinion_history[-1]),
        discounted_return=discounted_return(traj, params),
    )
