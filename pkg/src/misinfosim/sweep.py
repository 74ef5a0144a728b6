"""Sensitivity sweeps: re-estimate payoffs and equilibria over parameter grids.

Each grid cell gets its own derived seed, re-estimates the payoff matrix,
solves the equilibrium, simulates play sampled from it, and reports
polarization, exposure, and a phase label. Cell failures are recorded in
the cell, never aborting the grid.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .core import SimulationConfig, derive_seed, substream
from .dynamics import run_batch
from .game import PayoffMatrix, SolverParams, entropy, estimate_payoff_matrix, qre_solve
from .metrics import bimodality
from .strategies import StrategyProfile, profile_library, profile_probs_global

__all__ = [
    "SweepSpec",
    "SweepCellResult",
    "run_sweep",
    "phase_label",
    "DEFAULT_AXES",
]

_AXIS_NAMES = ("eta", "xi", "tau", "beta1", "beta2")

# Default grids: misinformation/credibility gain plane, rationality axis,
# susceptibility-shape plane.
DEFAULT_AXES = {
    "eta_xi": (("eta", (0.0, 0.5, 1.0, 1.5, 2.0)), ("xi", (0.0, 1.0, 2.0, 3.0, 4.0))),
    "tau": (("tau", (1.0, 3.0, 10.0, 30.0, 100.0)),),
    "beta": (("beta1", (1.0, 2.0, 3.0, 4.0, 5.0)), ("beta2", (1.0, 2.0, 3.0, 4.0, 5.0))),
}


@dataclass(frozen=True)
class SweepSpec:
    """A grid of parameter overrides plus the per-cell work sizes."""

    axes: tuple
    base_config: SimulationConfig
    solver: SolverParams = field(default_factory=SolverParams)
    payoff_rollouts: int = 200
    replications: int = 20

    def __post_init__(self) -> None:
        pairs = self.axes.items() if isinstance(self.axes, dict) else self.axes
        axes = tuple((str(name), tuple(float(v) for v in values)) for name, values in pairs)
        object.__setattr__(self, "axes", axes)
        if not 1 <= len(axes) <= 2:
            raise ValueError("a sweep takes 1 or 2 axes")
        for name, values in axes:
            if name not in _AXIS_NAMES:
                raise ValueError(f"unknown axis {name!r}; choose from {_AXIS_NAMES}")
            if len(values) == 0:
                raise ValueError(f"axis {name!r} has no values")
            if not np.all(np.isfinite(values)):
                raise ValueError(f"axis {name!r} has non-finite values")
        if self.payoff_rollouts < 2:
            raise ValueError("payoff_rollouts must be >= 2")
        if self.replications < 2:
            raise ValueError("replications must be >= 2")


@dataclass(frozen=True)
class SweepCellResult:
    """Equilibrium and outcome metrics for one grid cell."""

    params: dict
    mu: Optional[np.ndarray] = None
    nu: Optional[np.ndarray] = None
    value: float = float("nan")
    residual: float = float("nan")
    bimodality: float = float("nan")
    bimodality_se: float = float("nan")
    mean_exposure: float = float("nan")
    mean_exposure_se: float = float("nan")
    phase: str = ""
    low_confidence: bool = False
    error: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "params": dict(self.params),
            "mu": None if self.mu is None else np.asarray(self.mu).tolist(),
            "nu": None if self.nu is None else np.asarray(self.nu).tolist(),
            "value": self.value,
            "residual": self.residual,
            "bimodality": self.bimodality,
            "bimodality_se": self.bimodality_se,
            "mean_exposure": self.mean_exposure,
            "mean_exposure_se": self.mean_exposure_se,
            "phase": self.phase,
            "low_confidence": self.low_confidence,
            "error": self.error,
        }


def phase_label(cell: SweepCellResult, profiles: Optional[Sequence[StrategyProfile]] = None) -> str:
    """phase-1 when radical sources misinform more than centrist ones.

    Compares the equilibrium-expected factual probability of each side's
    outermost two sources against its innermost two, averaged over both
    players. phase-2 means the ordering is reversed (centrist sources
    carry the misinformation).
    """
    if cell.mu is None or cell.nu is None:
        raise ValueError("cell has no equilibrium")
    if profiles is None:
        profiles = profile_library()
    k = min(2, len(profiles[0].factual_prob))
    centrist = np.array([float(p.factual_prob[:k].mean()) for p in profiles])
    radical = np.array([float(p.factual_prob[-k:].mean()) for p in profiles])
    rad = 0.5 * (cell.mu @ radical + cell.nu @ radical)
    cent = 0.5 * (cell.mu @ centrist + cell.nu @ centrist)
    return "phase-1" if rad < cent else "phase-2"


def _apply_cell(
    spec: SweepSpec, assignment: dict, cell_index: int
) -> tuple[SimulationConfig, SolverParams]:
    cfg = spec.base_config
    params = cfg.params
    solver = spec.solver
    for name, value in assignment.items():
        if name in ("eta", "xi"):
            params = replace(params, **{name: value})
        elif name == "tau":
            solver = replace(solver, tau_L=value, tau_R=value)
        else:
            cfg = replace(cfg, **{name: value})
    cfg = replace(cfg, params=params, seed=derive_seed(spec.base_config.seed, "sweep-cell", cell_index))
    return cfg, solver


def _cell_outcomes(
    cfg: SimulationConfig,
    profiles: Sequence[StrategyProfile],
    mu: np.ndarray,
    nu: np.ndarray,
    replications: int,
) -> tuple[float, float, float, float]:
    """Simulate equilibrium play; mean and standard error of bimodality and exposure."""
    p = len(profiles)
    probs = np.empty((replications, cfg.n_sources))
    gens = []
    for rep in range(replications):
        g_choice = substream(cfg.seed, "cell-choice", rep)
        i = int(g_choice.choice(p, p=mu))
        j = int(g_choice.choice(p, p=nu))
        probs[rep] = profile_probs_global(profiles[i], profiles[j])
        gens.append(substream(cfg.seed, "cell-rollout", rep))
    out = run_batch(cfg, probs, gens, collect_exposure=True)
    bims = np.array([bimodality(out.final_opinions[r]) for r in range(replications)])
    exposures = out.exposure.mean(axis=1)
    return (
        float(bims.mean()),
        float(bims.std(ddof=1) / np.sqrt(replications)),
        float(exposures.mean()),
        float(exposures.std(ddof=1) / np.sqrt(replications)),
    )


def run_sweep(
    spec: SweepSpec,
    profiles: Optional[Sequence[StrategyProfile]] = None,
    n_workers: int = 1,
) -> list[SweepCellResult]:
    """All grid cells of the sweep, in grid order.

    Fully deterministic given (spec, base seed): every cell derives its
    own seed from its grid index, so neither execution order nor worker
    count can change any result.
    """
    if profiles is None:
        profiles = profile_library()
    names = [name for name, _ in spec.axes]
    grids = [values for _, values in spec.axes]
    results: list[SweepCellResult] = []
    for cell_index, combo in enumerate(itertools.product(*grids)):
        assignment = dict(zip(names, combo))
        try:
            cfg, solver = _apply_cell(spec, assignment, cell_index)
            payoff: PayoffMatrix = estimate_payoff_matrix(
                profiles, profiles, cfg, spec.payoff_rollouts, n_workers
            )
            eq = qre_solve(payoff.values, solver)
            bim, bim_se, exp_mean, exp_se = _cell_outcomes(
                cfg, profiles, eq.mu, eq.nu, spec.replications
            )
            cell = SweepCellResult(
                params=assignment,
                mu=eq.mu,
                nu=eq.nu,
                value=eq.value,
                residual=eq.residual,
                bimodality=bim,
                bimodality_se=bim_se,
                mean_exposure=exp_mean,
                mean_exposure_se=exp_se,
                low_confidence=bool(entropy(eq.mu) >= 0.95 * np.log(len(profiles))),
            )
            cell = replace(cell, phase=phase_label(cell, profiles))
        except Exception as exc:  # cell failures never abort the grid
            cell = SweepCellResult(params=assignment, error=f"{type(exc).__name__}: {exc}")
        results.append(cell)
    return results
