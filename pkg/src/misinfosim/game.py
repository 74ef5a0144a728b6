"""The two-coalition influence game over stationary profiles.

Player L (rows) maximizes the discounted opinion reward, player R
(columns) minimizes it. The payoff matrix is estimated by Monte Carlo;
the entropy-regularized equilibrium solves

    max_mu min_nu  mu^T A nu + (1/tau_L) H(mu) - (1/tau_R) H(nu)

whose unique saddle point is the softmax fixed point
mu* = softmax(tau_L * A nu*), nu* = softmax(-tau_R * A^T mu*).
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.special import logsumexp

from .core import SimulationConfig, substream
from .dynamics import run_batch
from .metrics import bimodality
from .strategies import StrategyProfile, profile_probs_global

__all__ = [
    "PayoffMatrix",
    "EquilibriumResult",
    "SolverParams",
    "DeviationReport",
    "estimate_payoff_matrix",
    "qre_solve",
    "qre_residual",
    "nash_oracle_small",
    "best_response",
    "deviation_experiment",
    "mirror_indices",
    "antisymmetry_report",
    "entropy",
]


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PayoffMatrix:
    """Empirical game matrix with per-entry Monte-Carlo standard errors."""

    values: np.ndarray
    std_errors: np.ndarray
    n_rollouts: int

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=float)
        e = np.asarray(self.std_errors, dtype=float)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "std_errors", e)
        if v.ndim != 2 or v.shape[0] != v.shape[1] or v.shape != e.shape:
            raise ValueError("values and std_errors must be square matrices of equal shape")
        if np.any(e < 0.0):
            raise ValueError("std_errors must be >= 0")


@dataclass(frozen=True)
class EquilibriumResult:
    """Solver output: mixed strategies, value, fixed-point gap, iteration count."""

    mu: np.ndarray
    nu: np.ndarray
    value: float
    residual: float
    iterations: int
    converged: bool = True

    def __post_init__(self) -> None:
        mu = np.asarray(self.mu, dtype=float)
        nu = np.asarray(self.nu, dtype=float)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "nu", nu)
        for dist in (mu, nu):
            if np.any(dist < 0.0) or abs(dist.sum() - 1.0) > 1e-9:
                raise ValueError("mu and nu must be probability distributions")
        if self.residual < 0.0:
            raise ValueError("residual must be >= 0")


@dataclass(frozen=True)
class SolverParams:
    """Rationality and iteration settings for the equilibrium solver.

    step_size=None selects 0.5 / ||A||_inf once the matrix is known.
    """

    tau_L: float = 10.0
    tau_R: float = 10.0
    step_size: Optional[float] = None
    max_iters: int = 20_000_000
    tolerance: float = 1e-8

    def __post_init__(self) -> None:
        if self.tau_L <= 0 or self.tau_R <= 0:
            raise ValueError("tau_L and tau_R must be > 0")
        if self.step_size is not None and self.step_size <= 0:
            raise ValueError("step_size must be > 0 when given")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be > 0")


# ---------------------------------------------------------------------------
# Payoff estimation
# ---------------------------------------------------------------------------

def _payoff_entry(config: SimulationConfig, i: int, j: int, probs: np.ndarray, n_rollouts: int):
    """Mean and standard error of the return for one profile pair.

    Rollout seeds depend only on (config.seed, rollout index), so every
    matrix entry reuses the same draws (common random numbers). Paired
    noise cancels when comparing entries; in particular, when actions
    cannot influence the dynamics (eta = xi = 0) all entries are
    bitwise identical and the estimated game is exactly symmetric.
    """
    gens = [substream(config.seed, "rollout", r) for r in range(n_rollouts)]
    out = run_batch(config, probs, gens)
    mean = float(out.returns.mean())
    se = float(out.returns.std(ddof=1) / np.sqrt(n_rollouts))
    return i, j, mean, se


def estimate_payoff_matrix(
    profiles_L: Sequence[StrategyProfile],
    profiles_R: Sequence[StrategyProfile],
    config: SimulationConfig,
    n_rollouts: int = 200,
    n_workers: int = 1,
) -> PayoffMatrix:
    """Monte-Carlo estimate of the profile-vs-profile payoff matrix.

    Entry (i, j) averages n_rollouts independent rollouts of L playing
    profiles_L[i] against R playing profiles_R[j]. Rollout seeds derive
    from (config.seed, rollout index) and are shared by all entries
    (common random numbers), so the result is identical for any worker
    count and entry comparisons benefit from paired noise.
    """
    if n_rollouts < 2:
        raise ValueError("n_rollouts must be >= 2")
    if len(profiles_L) != len(profiles_R):
        raise ValueError("profile lists must have equal length")
    p = len(profiles_L)
    jobs = [
        (config, i, j, profile_probs_global(profiles_L[i], profiles_R[j]), n_rollouts)
        for i in range(p)
        for j in range(p)
    ]
    values = np.empty((p, p))
    errors = np.empty((p, p))
    if n_workers <= 1:
        results = [_payoff_entry(*job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(_payoff_entry, *zip(*jobs)))
    for i, j, mean, se in results:
        values[i, j] = mean
        errors[i, j] = se
    return PayoffMatrix(values=values, std_errors=errors, n_rollouts=n_rollouts)


def mirror_indices(profiles: Sequence[StrategyProfile]) -> list[int]:
    """Index of each profile's mirror image across the player axis.

    Both players draw from the same profile shapes, so a profile's mirror
    is the entry with identical probabilities (itself, in the default
    library).
    """
    out = []
    for i, pi in enumerate(profiles):
        match = None
        for j, pj in enumerate(profiles):
            if pi.factual_prob.shape == pj.factual_prob.shape and np.allclose(
                pi.factual_prob, pj.factual_prob
            ):
                match = j
                break
        if match is None:
            raise ValueError(f"profile {pi.name} has no mirror in the library")
        out.append(match)
    return out


def antisymmetry_report(payoff: PayoffMatrix, profiles: Sequence[StrategyProfile]) -> dict:
    """How well A[i][j] = -A[m(j)][m(i)] holds, in combined-standard-error units."""
    m = mirror_indices(profiles)
    a, se = payoff.values, payoff.std_errors
    p = a.shape[0]
    z = np.empty((p, p))
    for i in range(p):
        for j in range(p):
            combined = np.sqrt(se[i, j] ** 2 + se[m[j], m[i]] ** 2)
            z[i, j] = abs(a[i, j] + a[m[j], m[i]]) / combined if combined > 0 else 0.0
    return {
        "fraction_within_3se": float(np.mean(z <= 3.0)),
        "max_z": float(z.max()),
        "mean_z": float(z.mean()),
    }


# ---------------------------------------------------------------------------
# Equilibrium solving
# ---------------------------------------------------------------------------

def entropy(dist: np.ndarray) -> float:
    """Shannon entropy in nats; 0 log 0 reads as 0."""
    d = np.asarray(dist, dtype=float)
    nz = d[d > 0.0]
    return float(-np.sum(nz * np.log(nz)))


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max()
    e = np.exp(z)
    return e / e.sum()


def qre_residual(A: np.ndarray, mu: np.ndarray, nu: np.ndarray, tau_L: float, tau_R: float) -> float:
    """Max-norm gap of the two softmax fixed-point equations."""
    A = np.asarray(A, dtype=float)
    gap_l = np.max(np.abs(mu - _softmax(tau_L * (A @ nu))))
    gap_r = np.max(np.abs(nu - _softmax(-tau_R * (A.T @ mu))))
    return float(max(gap_l, gap_r))


def _dual_newton_polish(
    A: np.ndarray, solver: SolverParams, nu: np.ndarray, max_steps: int = 40
) -> tuple[np.ndarray, np.ndarray]:
    """Drive the dual minimizer to fixed-point accuracy with Newton steps.

    Works in nu-space on the numerical support, solving the equality-
    constrained Newton system of F (see _dual_warm_start) and keeping
    positivity by backtracking. Quadratic convergence takes the L-BFGS
    iterate the last stretch from ~1e-6 residual to machine precision,
    which the first-order loop would need ~tau * ||A|| iterations for.
    Returns logits (log mu, log nu); mu is the exact best response to
    nu, so the remaining residual sits entirely in the nu equation.
    """
    tau_l, tau_r = solver.tau_L, solver.tau_R

    def f_value(v: np.ndarray) -> float:
        z = tau_l * (A @ v)
        pos = v > 0.0
        return float(logsumexp(z)) / tau_l + float(v[pos] @ np.log(v[pos])) / tau_r

    target_tol = 0.5 * solver.tolerance
    for _ in range(max_steps):
        z = tau_l * (A @ nu)
        z -= logsumexp(z)
        mu = np.exp(z)
        ln_fix = -tau_r * (A.T @ mu)
        ln_fix -= logsumexp(ln_fix)
        if np.max(np.abs(nu - np.exp(ln_fix))) <= target_tol:
            break
        support = np.flatnonzero(nu > 1e-14)
        k = support.size
        a_s = A[:, support]
        nu_s = nu[support]
        grad = a_s.T @ mu + (np.log(nu_s) + 1.0) / tau_r
        hess = tau_l * (a_s.T @ (mu[:, None] * a_s) - np.outer(a_s.T @ mu, a_s.T @ mu))
        hess[np.diag_indices(k)] += 1.0 / (tau_r * nu_s)
        kkt = np.zeros((k + 1, k + 1))
        kkt[:k, :k] = hess
        kkt[:k, k] = 1.0
        kkt[k, :k] = 1.0
        rhs = np.zeros(k + 1)
        rhs[:k] = -grad
        try:
            step = np.linalg.solve(kkt, rhs)[:k]
        except np.linalg.LinAlgError:                    # pragma: no cover
            break
        t = 1.0
        neg = step < 0.0
        if np.any(neg):
            t = min(1.0, 0.99 * float(np.min(nu_s[neg] / -step[neg])))
        base = f_value(nu)
        for _ in range(30):
            trial = nu.copy()
            trial[support] = nu_s + t * step
            trial = np.clip(trial, 0.0, None)
            trial /= trial.sum()
            if f_value(trial) <= base + 1e-12 * abs(base):
                nu = trial
                break
            t *= 0.5
        else:                                            # pragma: no cover
            break
    z = tau_l * (A @ nu)
    z -= logsumexp(z)
    with np.errstate(divide="ignore"):
        ln = np.log(nu)
    return z, ln


def _dual_warm_start(A: np.ndarray, solver: SolverParams) -> Optional[tuple[np.ndarray, np.ndarray]]:
    """Starting point from the single-player convex reduction.

    For fixed nu the maximizing mu is softmax(tau_L * A nu) in closed
    form, so the saddle problem collapses to minimizing

        F(nu) = (1/tau_L) logsumexp(tau_L * A nu) - H(nu) / tau_R

    over the simplex — smooth and strictly convex. Minimizing it in
    logit coordinates with L-BFGS and finishing with Newton steps
    (_dual_newton_polish) lands on the fixed point no matter how large
    tau * ||A|| is, which the first-order extragradient loop alone
    would need ~tau * ||A|| iterations to reach. The loop then merely
    certifies (or, rarely, polishes) the residual.
    """
    from scipy.optimize import minimize

    tau_l, tau_r = solver.tau_L, solver.tau_R

    def objective(theta: np.ndarray):
        ln = theta - logsumexp(theta)
        nu = np.exp(ln)
        z = tau_l * (A @ nu)
        lse = float(logsumexp(z))
        mu = np.exp(z - lse)
        f = lse / tau_l + float(nu @ ln) / tau_r
        u = A.T @ mu + (ln + 1.0) / tau_r
        return f, nu * (u - float(nu @ u))

    try:
        res = minimize(
            objective,
            np.zeros(A.shape[1]),
            jac=True,
            method="L-BFGS-B",
            options={"maxiter": 1000, "ftol": 1e-18, "gtol": 1e-14},
        )
        theta = np.asarray(res.x, dtype=float)
    except Exception:                                    # pragma: no cover
        return None
    if not np.all(np.isfinite(theta)):                   # pragma: no cover
        return None
    ln = theta - logsumexp(theta)
    return _dual_newton_polish(A, solver, np.exp(ln))


def qre_solve(
    A: np.ndarray,
    solver: SolverParams,
    init: Optional[tuple[np.ndarray, np.ndarray]] = None,
) -> EquilibriumResult:
    """Entropy-regularized equilibrium by extragradient in log space.

    Each half-step applies the exact entropic prox of the entropy term:
    log mu <- (log mu + step * A nu) / (1 + step/tau_L), renormalized
    (and the sign-flipped analog for nu). The extrapolated point supplies
    the gradients for the full step. Unless an explicit init is given,
    the loop starts from the convex-reduction warm start (see
    _dual_warm_start), which keeps iteration counts flat in tau * ||A||.
    Residual is checked periodically; non-convergence is reported,
    never silently accepted.
    """
    A = np.asarray(A, dtype=float)
    rows, cols = A.shape
    norm_inf = float(np.max(np.sum(np.abs(A), axis=1)))
    step = solver.step_size if solver.step_size is not None else (0.5 / norm_inf if norm_inf > 0 else 1.0)
    scale_l = 1.0 / (1.0 + step / solver.tau_L)
    scale_r = 1.0 / (1.0 + step / solver.tau_R)

    if init is not None:
        mu0, nu0 = init
        with np.errstate(divide="ignore"):
            lm = np.log(np.asarray(mu0, dtype=float))
            ln = np.log(np.asarray(nu0, dtype=float))
    else:
        warm = _dual_warm_start(A, solver)
        if warm is not None:
            lm, ln = warm
        else:                                            # pragma: no cover
            lm = np.full(rows, -np.log(rows))
            ln = np.full(cols, -np.log(cols))

    residual = qre_residual(A, np.exp(lm), np.exp(ln), solver.tau_L, solver.tau_R)
    if residual <= solver.tolerance:
        mu = np.exp(lm)
        nu = np.exp(ln)
        mu /= mu.sum()
        nu /= nu.sum()
        value = float(mu @ A @ nu + entropy(mu) / solver.tau_L - entropy(nu) / solver.tau_R)
        return EquilibriumResult(mu=mu, nu=nu, value=value, residual=residual, iterations=0)

    check_every = 50
    iterations = 0
    residual = np.inf
    while iterations < solver.max_iters:
        mu = np.exp(lm)
        nu = np.exp(ln)
        lm_half = (lm + step * (A @ nu)) * scale_l
        lm_half -= logsumexp(lm_half)
        ln_half = (ln - step * (A.T @ mu)) * scale_r
        ln_half -= logsumexp(ln_half)
        mu_half = np.exp(lm_half)
        nu_half = np.exp(ln_half)
        lm = (lm + step * (A @ nu_half)) * scale_l
        lm -= logsumexp(lm)
        ln = (ln - step * (A.T @ mu_half)) * scale_r
        ln -= logsumexp(ln)
        iterations += 1
        if iterations % check_every == 0 or iterations == solver.max_iters:
            mu = np.exp(lm)
            nu = np.exp(ln)
            residual = qre_residual(A, mu, nu, solver.tau_L, solver.tau_R)
            if residual <= solver.tolerance:
                break

    mu = np.exp(lm)
    nu = np.exp(ln)
    mu /= mu.sum()
    nu /= nu.sum()
    residual = qre_residual(A, mu, nu, solver.tau_L, solver.tau_R)
    value = float(mu @ A @ nu + entropy(mu) / solver.tau_L - entropy(nu) / solver.tau_R)
    return EquilibriumResult(
        mu=mu,
        nu=nu,
        value=value,
        residual=residual,
        iterations=iterations,
        converged=bool(residual <= solver.tolerance),
    )


def best_response(A: np.ndarray, opponent: np.ndarray, side: str, tau: float) -> np.ndarray:
    """Softmax response with temperature tau against a fixed opponent mix."""
    A = np.asarray(A, dtype=float)
    opponent = np.asarray(opponent, dtype=float)
    if side == "L":
        return _softmax(tau * (A @ opponent))
    if side == "R":
        return _softmax(-tau * (A.T @ opponent))
    raise ValueError("side must be 'L' or 'R'")


# ---------------------------------------------------------------------------
# Exact small-matrix Nash oracle
# ---------------------------------------------------------------------------

def _supports(p: int, k: int):
    from itertools import combinations

    return combinations(range(p), k)


def nash_oracle_small(A: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
    """Exact mixed Nash of a small zero-sum matrix game by support enumeration.

    Tries square support pairs of growing size; for each, solves the
    equalizing linear systems and keeps the first pair that passes the
    feasibility and best-response checks.
    """
    A = np.asarray(A, dtype=float)
    p, q = A.shape
    if max(p, q) > 5:
        raise ValueError("support enumeration oracle is limited to 5x5 games")
    tol = 1e-9
    for k in range(1, min(p, q) + 1):
        for rows in _supports(p, k):
            for cols in _supports(q, k):
                sub = A[np.ix_(rows, cols)]
                # mu^T sub = v 1,  sum mu = 1  (row player equalizes columns)
                m1 = np.zeros((k + 1, k + 1))
                m1[:k, :k] = sub.T
                m1[:k, k] = -1.0
                m1[k, :k] = 1.0
                rhs = np.zeros(k + 1)
                rhs[k] = 1.0
                # sub nu = v 1,  sum nu = 1
                m2 = np.zeros((k + 1, k + 1))
                m2[:k, :k] = sub
                m2[:k, k] = -1.0
                m2[k, :k] = 1.0
                try:
                    sol1 = np.linalg.solve(m1, rhs)
                    sol2 = np.linalg.solve(m2, rhs)
                except np.linalg.LinAlgError:
                    continue
                mu_s, v1 = sol1[:k], sol1[k]
                nu_s, v2 = sol2[:k], sol2[k]
                if abs(v1 - v2) > 1e-7:
                    continue
                if np.any(mu_s < -tol) or np.any(nu_s < -tol):
                    continue
                mu = np.zeros(p)
                nu = np.zeros(q)
                mu[list(rows)] = np.clip(mu_s, 0.0, None)
                nu[list(cols)] = np.clip(nu_s, 0.0, None)
                mu /= mu.sum()
                nu /= nu.sum()
                value = float(mu @ A @ nu)
                # no profitable deviation outside the supports
                if np.max(A @ nu) > value + 1e-7:
                    continue
                if np.min(mu @ A) < value - 1e-7:
                    continue
                return mu, nu, value
    raise RuntimeError("no equilibrium found; the game should always have one")


# ---------------------------------------------------------------------------
# Deviation analysis
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DeviationReport:
    """Outcome of pinning L to one profile while R responds with softmax."""

    forced_L: int
    response: np.ndarray                  # R's softmax response to the pinned row
    equilibrium_mu: np.ndarray
    equilibrium_nu: np.ndarray
    forced_payoff_L: float                # A[forced] . response
    equilibrium_payoff_L: float           # mu* A nu* (bilinear part)
    response_mean_factual: float
    equilibrium_response_mean_factual: float
    bimodality_mean: float
    bimodality_se: float
    exposure_left: float                  # mean exposure of individuals ending at x < 0
    exposure_right: float
    to_dict_extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "forced_L": self.forced_L,
            "response": self.response.tolist(),
            "equilibrium_mu": self.equilibrium_mu.tolist(),
            "equilibrium_nu": self.equilibrium_nu.tolist(),
            "forced_payoff_L": self.forced_payoff_L,
            "equilibrium_payoff_L": self.equilibrium_payoff_L,
            "response_mean_factual": self.response_mean_factual,
            "equilibrium_response_mean_factual": self.equilibrium_response_mean_factual,
            "bimodality_mean": self.bimodality_mean,
            "bimodality_se": self.bimodality_se,
            "exposure_left": self.exposure_left,
            "exposure_right": self.exposure_right,
            **self.to_dict_extra,
        }


def deviation_experiment(
    config: SimulationConfig,
    profiles: Sequence[StrategyProfile],
    solver: SolverParams,
    forced_L: int,
    payoff: Optional[PayoffMatrix] = None,
    n_rollouts: int = 200,
    n_replications: int = 20,
    n_workers: int = 1,
) -> DeviationReport:
    """Pin L to one profile, let R respond optimally, and simulate the matchup.

    R's response is the softmax best response to the pinned row of the
    payoff matrix. Replications sample R's profile from that response and
    report polarization plus side-conditional exposure.
    """
    p = len(profiles)
    if not 0 <= forced_L < p:
        raise ValueError(f"forced_L must index one of the {p} profiles")
    if payoff is None:
        payoff = estimate_payoff_matrix(profiles, profiles, config, n_rollouts, n_workers)
    eq = qre_solve(payoff.values, solver)
    pinned = np.zeros(p)
    pinned[forced_L] = 1.0
    response = best_response(payoff.values, pinned, "R", solver.tau_R)

    mean_factual = np.array([pr.mean_factual_prob for pr in profiles])
    bims = np.empty(n_replications)
    exp_left = []
    exp_right = []
    samples = []
    for rep in range(n_replications):
        g_choice = substream(config.seed, "deviation-choice", forced_L, rep)
        j = int(g_choice.choice(p, p=response))
        probs = profile_probs_global(profiles[forced_L], profiles[j])
        g_roll = substream(config.seed, "deviation-rollout", forced_L, rep)
        out = run_batch(config, probs, [g_roll], collect_exposure=True)
        x_final = out.final_opinions[0]
        gamma = out.exposure[0]
        bims[rep] = bimodality(x_final)
        if np.any(x_final < 0):
            exp_left.append(float(gamma[x_final < 0].mean()))
        if np.any(x_final > 0):
            exp_right.append(float(gamma[x_final > 0].mean()))
        samples.append(
            {
                "replication": rep,
                "response_profile": j,
                "bimodality": float(bims[rep]),
                "final_opinions": x_final.tolist(),
            }
        )

    return DeviationReport(
        forced_L=forced_L,
        response=response,
        equilibrium_mu=eq.mu,
        equilibrium_nu=eq.nu,
        forced_payoff_L=float(payoff.values[forced_L] @ response),
        equilibrium_payoff_L=float(eq.mu @ payoff.values @ eq.nu),
        response_mean_factual=float(response @ mean_factual),
        equilibrium_response_mean_factual=float(eq.nu @ mean_factual),
        bimodality_mean=float(bims.mean()),
        bimodality_se=float(bims.std(ddof=1) / np.sqrt(n_replications)) if n_replications > 1 else 0.0,
        exposure_left=float(np.mean(exp_left)) if exp_left else 0.0,
        exposure_right=float(np.mean(exp_right)) if exp_right else 0.0,
        to_dict_extra={"replications": samples},
    )
