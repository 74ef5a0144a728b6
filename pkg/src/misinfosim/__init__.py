"""Opinion dynamics under misinformation-aware source credibility.

Simulates how news-source credibility and misinformation reach shape a
population's opinions, estimates the zero-sum payoff matrix of the
two-coalition influence game by Monte Carlo, solves its
entropy-regularized (quantal-response) equilibria, and sweeps phase
diagrams over the model's sensitivity parameters.
"""

from .core import (
    ModelParams,
    PopulationState,
    SimulationConfig,
    SourceState,
    Trajectory,
    config_digest,
    default_config,
    default_params,
    default_source_opinions,
    derive_seed,
    init_population,
    owned_source_indices,
    sample_susceptibilities,
    substream,
)
from .dynamics import (
    BatchResult,
    Observation,
    credibility_factor,
    credibility_step,
    discretize_opinions,
    media_kernel,
    misinfo_factor,
    opinion_step,
    run_batch,
    simulate,
    social_kernel,
)
from .game import (
    DeviationReport,
    EquilibriumResult,
    PayoffMatrix,
    SolverParams,
    antisymmetry_report,
    best_response,
    deviation_experiment,
    entropy,
    estimate_payoff_matrix,
    mirror_indices,
    nash_oracle_small,
    qre_residual,
    qre_solve,
)
from .metrics import (
    BIMODALITY_THRESHOLD,
    MetricReport,
    bimodality,
    build_metric_report,
    discounted_return,
    misinformation_exposure,
    running_reward,
)
from .strategies import (
    CredibilityCurveRecord,
    StrategyProfile,
    load_credibility_curve,
    load_profile_file,
    profile_library,
    profile_probs_global,
    sample_actions,
)
from .sweep import DEFAULT_AXES, SweepCellResult, SweepSpec, phase_label, run_sweep

__version__ = "0.1.0"
