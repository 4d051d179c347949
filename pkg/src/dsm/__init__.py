"""Double score matching: mass imputation and population inference.

Combines a volunteer (nonprobability) sample carrying the outcome with a
design-weighted reference sample that lacks it.  Units are matched on
two fitted scores, a sampling score and a prognostic score, so the
matching space stays two-dimensional no matter how many covariates the
models use.  On top of the matching sit bias-corrected point estimators,
an analytic variance, wild-bootstrap confidence intervals, and a Monte
Carlo harness for the built-in simulation study.
"""

from .errors import (
    BracketFailure,
    DegenerateScore,
    DomainError,
    DsmError,
    ExtremePropensityWarning,
    InfeasibleRatio,
    JTooLarge,
    MTooLarge,
    NonConvergence,
    NonpositiveWeight,
    ParseError,
    RankDeficient,
    RhoOutOfRange,
    SchemaMismatch,
    Separation,
)
from .estimators import (
    PointEstimates,
    bias_hat,
    bias_hat_weighted,
    dre_estimate,
    mu_b,
    mu_b_debiased,
    mu_dsm,
    mu_dsm_debiased,
    point_estimates,
)
from .io import RunConfig, load_samples
from .matching import (
    InnerNeighbors,
    MatchPlan,
    find_inner_neighbors,
    find_matches,
    impute,
)
from .scores import (
    FitOptions,
    SampleA,
    SampleB,
    ScoreFit,
    ScoreMatrix,
    build_score_matrix,
    fit_prognostic,
    fit_propensity,
    fit_scores,
)
from .simulation import (
    COVERAGE_GRID,
    NONLINEARITY_MODES,
    SCENARIOS,
    EstimatorRow,
    PopulationFrame,
    ScenarioSpec,
    SimReport,
    apply_scenario_views,
    calibrate_pps,
    calibrate_sigma,
    calibrate_theta0,
    gen_population,
    poisson_sample,
    pps_sample,
    run_coverage_grid,
    run_monte_carlo,
    run_scenario_table,
)
from .uncertainty import (
    MAMMEN_NEG,
    MAMMEN_P_NEG,
    MAMMEN_POS,
    BootstrapSpec,
    IntervalReport,
    analytic_variance,
    bootstrap_ci_debiased,
    bootstrap_ci_plain,
    bootstrap_ci_population,
    mammen_draw,
    sigma2_homoskedastic,
    sigma2_unit,
    sigma2_units,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
