"""Synthetic-population generator and the Monte Carlo harness.

One replication builds a finite population with four dependent
covariates and a linear outcome, draws a volunteer sample by Poisson
sampling with covariate-driven inclusion odds and a reference sample by
systematic probability-proportional-to-size sampling on a size variable
tied to the third covariate, then runs every estimator under a chosen
model-specification scenario.  Scenario tags are two letters, prognostic
model first: a T model uses all four observed covariates, an F model
omits the fourth, the one carrying nearly all of the volunteer sample's
selection bias.  A nonlinearity mode distorts what the analyst observes
(the sampling designs always act on the true covariates), so even
T-labeled models can see a wrong functional form.
"""

from __future__ import annotations

import os
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from itertools import repeat

import numpy as np
from scipy.special import expit

from .errors import (
    BracketFailure,
    DomainError,
    DsmError,
    ExtremePropensityWarning,
    InfeasibleRatio,
    RhoOutOfRange,
)
from .estimators import point_estimates
from .matching import find_matches
from .scores import FitOptions, SampleA, SampleB, build_score_matrix, fit_scores
from .uncertainty import BootstrapSpec, bootstrap_ci_debiased, bootstrap_ci_population

__all__ = [
    "SCENARIOS",
    "NONLINEARITY_MODES",
    "COVERAGE_GRID",
    "ScenarioSpec",
    "PopulationFrame",
    "EstimatorRow",
    "SimReport",
    "calibrate_sigma",
    "calibrate_theta0",
    "calibrate_pps",
    "gen_population",
    "poisson_sample",
    "pps_sample",
    "apply_scenario_views",
    "run_monte_carlo",
    "run_scenario_table",
    "run_coverage_grid",
]

SCENARIOS = ("TT", "FT", "TF", "FF")
NONLINEARITY_MODES = ("none", "cubic", "extreme")

# Volunteer-sample selection slopes on the true covariates.
_SELECTION_SLOPES = np.array([0.1, 0.2, 0.1, 0.2])

# (m, n_a, n_b) rows of the coverage study.
COVERAGE_GRID = (
    (3, 500, 1000),
    (3, 1000, 500),
    (5, 1000, 500),
    (5, 1000, 1000),
    (6, 1000, 2000),
    (8, 1500, 1000),
    (8, 1500, 1500),
    (10, 2000, 2000),
    (10, 2500, 2500),
    (15, 3000, 1500),
)

_CALIBRATION_TOL = 1e-6


@dataclass(frozen=True)
class ScenarioSpec:
    """Configuration of one Monte Carlo run (a single scenario).

    n_a is the expected volunteer-sample size (Poisson sampling gives a
    random realized size); n_b is the exact reference-sample size.
    n_boot = 0 skips interval construction.
    """

    scenario: str = "TT"
    nonlinearity: str = "none"
    n_pop: int = 20000
    n_a: int = 500
    n_b: int = 1000
    m: int = 3
    n_reps: int = 500
    n_boot: int = 0
    alpha: float = 0.05
    rho: float = 0.3
    seed: int = 0
    workers: int | None = None

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ValueError(f"scenario must be one of {SCENARIOS}")
        if self.nonlinearity not in NONLINEARITY_MODES:
            raise ValueError(f"nonlinearity must be one of {NONLINEARITY_MODES}")
        if min(self.n_pop, self.n_a, self.n_b, self.m, self.n_reps) < 1:
            raise ValueError("sizes must be positive")
        if self.n_b >= self.n_pop or self.n_a >= self.n_pop:
            raise ValueError("sample sizes must be smaller than the population")
        if self.n_boot < 0:
            raise ValueError("n_boot must be nonnegative")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie strictly between 0 and 1")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")


@dataclass(frozen=True)
class PopulationFrame:
    """One realized finite population with its design quantities."""

    x: np.ndarray
    y: np.ndarray
    cond_mean: np.ndarray
    pi_a: np.ndarray
    pi_b: np.ndarray
    sigma: float
    theta0: float
    c_pps: float

    @property
    def n(self) -> int:
        return self.x.shape[0]


# -- calibrations -------------------------------------------------------

def calibrate_sigma(linear_predictor, rho: float) -> float:
    """Residual standard deviation giving corr(y, E[y|x]) = rho.

    With y = lp + sigma * eps the correlation is sd(lp) / sqrt(sd(lp)^2
    + sigma^2); solving gives sigma = sd(lp) * sqrt(1/rho^2 - 1).
    rho = 1 is the noiseless limit.
    """
    if not 0.0 < rho <= 1.0:
        raise RhoOutOfRange(f"rho must lie in (0, 1], got {rho!r}")
    lp = np.asarray(linear_predictor, dtype=np.float64)
    return float(np.std(lp) * np.sqrt(1.0 / rho**2 - 1.0))


def calibrate_theta0(x, target_n_a: float) -> float:
    """Selection intercept making the expected volunteer-sample size hit
    target_n_a, by bisection on the monotone size function."""
    base = np.asarray(x, dtype=np.float64) @ _SELECTION_SLOPES

    def excess(t):
        return float(expit(t + base).sum()) - target_n_a

    lo, hi = -40.0, 40.0
    e_lo, e_hi = excess(lo), excess(hi)
    for _ in range(20):
        if e_lo <= 0.0 <= e_hi:
            break
        lo, hi = lo * 2.0, hi * 2.0
        e_lo, e_hi = excess(lo), excess(hi)
    else:
        raise BracketFailure(f"target size {target_n_a} cannot be bracketed")
    if not e_lo <= 0.0 <= e_hi:
        raise BracketFailure(f"target size {target_n_a} is infeasible for this population")

    for _ in range(200):
        mid = 0.5 * (lo + hi)
        e_mid = excess(mid)
        if abs(e_mid) <= _CALIBRATION_TOL:
            return mid
        if e_mid < 0.0:
            lo = mid
        else:
            hi = mid
    raise BracketFailure("bisection failed to reach tolerance")


def calibrate_pps(x3, target_n_b: int, ratio: float = 50.0):
    """Size variable and inclusion probabilities for the reference design.

    Shifts the third covariate by the constant c making max(size)/min(size)
    equal ratio, scales to sum(pi) = target_n_b, then repairs any pi > 1
    by capping and rescaling the rest (which preserves the total).

    Returns (c, pi).
    """
    if ratio <= 1.0:
        raise ValueError("ratio must exceed 1")
    x3 = np.asarray(x3, dtype=np.float64)
    n = x3.shape[0]
    if not 0 < target_n_b < n:
        raise ValueError("target size must lie strictly between 0 and the population size")
    c = (x3.max() - ratio * x3.min()) / (ratio - 1.0)
    size = c + x3
    if size.min() <= 0.0:
        raise InfeasibleRatio(f"ratio {ratio} forces nonpositive size values")

    pi = target_n_b * size / size.sum()
    capped = np.zeros(n, dtype=bool)
    for _ in range(200):
        if not np.any(pi > 1.0):
            break
        capped |= pi >= 1.0
        remaining = target_n_b - int(capped.sum())
        if remaining <= 0:
            raise InfeasibleRatio("too many units force pi = 1 for this target size")
        free = ~capped
        pi[capped] = 1.0
        pi[free] = remaining * size[free] / size[free].sum()
    return float(c), pi


# -- population and samples ---------------------------------------------

def gen_population(spec: ScenarioSpec, rng) -> PopulationFrame:
    """Draw one finite population.

    Covariates chain on each other (binary, shifted uniform, shifted
    exponential, shifted chi-square); the outcome is linear in all four
    with noise calibrated to spec.rho.  Draw order is fixed, so a given
    generator state always yields the same population.
    """
    n = spec.n_pop
    x1 = (rng.random(n) < 0.5).astype(np.float64)
    x2 = rng.uniform(0.0, 2.0, n) + 0.3 * x1
    x3 = rng.exponential(1.0, n) + 0.2 * (x1 + x2)
    x4 = rng.chisquare(4.0, n) + 0.1 * (x1 + x2 + x3)
    x = np.column_stack([x1, x2, x3, x4])

    cond_mean = 2.0 + x.sum(axis=1)
    sigma = calibrate_sigma(cond_mean, spec.rho)
    y = cond_mean + sigma * rng.standard_normal(n)

    theta0 = calibrate_theta0(x, spec.n_a)
    pi_a = expit(theta0 + x @ _SELECTION_SLOPES)
    c_pps, pi_b = calibrate_pps(x3, spec.n_b)
    return PopulationFrame(
        x=x, y=y, cond_mean=cond_mean, pi_a=pi_a, pi_b=pi_b,
        sigma=sigma, theta0=theta0, c_pps=c_pps,
    )


def poisson_sample(pi, rng) -> np.ndarray:
    """Independent Bernoulli selection; returns sorted indices (random size)."""
    pi = np.asarray(pi, dtype=np.float64)
    return np.flatnonzero(rng.random(pi.shape[0]) < pi)


def pps_sample(pi, n_b: int, rng) -> np.ndarray:
    """Fixed-size systematic PPS selection on a randomly permuted frame.

    Requires sum(pi) == n_b (within 1e-6) and 0 < pi <= 1; each unit's
    inclusion probability is then exactly pi.  Returns sorted indices.
    """
    pi = np.asarray(pi, dtype=np.float64)
    if abs(float(pi.sum()) - n_b) > _CALIBRATION_TOL:
        raise ValueError("inclusion probabilities must sum to the sample size")
    if np.any(pi <= 0.0) or np.any(pi > 1.0):
        raise ValueError("inclusion probabilities must lie in (0, 1]")
    perm = rng.permutation(pi.shape[0])
    edges = np.cumsum(pi[perm])
    points = rng.random() + np.arange(n_b)
    pos = np.searchsorted(edges, points, side="right")
    pos = np.minimum(pos, pi.shape[0] - 1)
    if np.any(pos[1:] == pos[:-1]):
        raise RuntimeError("systematic selection hit a unit twice")
    return np.sort(perm[pos])


def apply_scenario_views(x, scenario: str, nonlinearity: str):
    """Observed covariates and per-model column subsets for a scenario.

    Returns (xbar, cols_prognostic, cols_propensity) where xbar is the
    analyst-visible covariate matrix and each cols tuple indexes the
    columns that model uses (F drops the fourth covariate).
    """
    if scenario not in SCENARIOS:
        raise ValueError(f"scenario must be one of {SCENARIOS}")
    xbar = _observed_covariates(np.asarray(x, dtype=np.float64), nonlinearity)
    full, reduced = (0, 1, 2, 3), (0, 1, 2)
    cols_y = full if scenario[0] == "T" else reduced
    cols_r = full if scenario[1] == "T" else reduced
    return xbar, cols_y, cols_r


def _observed_covariates(x, mode):
    if mode == "none":
        return x
    if mode == "cubic":
        return np.column_stack([x[:, 0], x[:, 1] ** 2, x[:, 2] ** 3, x[:, 3] ** 2])
    if mode == "extreme":
        if np.any(x[:, 1] < 0.0) or np.any(x[:, 2] <= 0.0) or np.any(x[:, 3] <= 0.0):
            raise DomainError("fractional/negative exponents need positive covariates")
        return np.column_stack(
            [x[:, 0], x[:, 1] ** 1.15, x[:, 2] ** -0.85, x[:, 3] ** -1.15]
        )
    raise ValueError(f"nonlinearity must be one of {NONLINEARITY_MODES}")


# -- Monte Carlo --------------------------------------------------------

def _replicate(spec: ScenarioSpec, s: int):
    """Run replication s; returns ("ok", results) or ("fail", error name).

    The replication stream is keyed by (seed, s), so a given replication
    is identical no matter how the work is scheduled, and identical
    across scenarios sharing a seed (the samples do not depend on the
    scenario, only the model views do).
    """
    rng = np.random.default_rng([spec.seed, s])
    pop = gen_population(spec, rng)
    ia = poisson_sample(pop.pi_a, rng)
    ib = pps_sample(pop.pi_b, spec.n_b, rng)
    boot_seed = int(rng.integers(0, 2**63))

    out = {
        "target_b": float(pop.cond_mean[ib].mean()),
        "target_pop": float(pop.cond_mean.mean()),
        "sample_a_mean": float(pop.y[ia].mean()),
    }
    try:
        xbar, cols_y, cols_r = apply_scenario_views(pop.x, spec.scenario, spec.nonlinearity)
        a = SampleA(xbar[ia], pop.y[ia])
        b = SampleB(xbar[ib], 1.0 / pop.pi_b[ib])
        fit = fit_scores(a, b, FitOptions(), cols_r=cols_r, cols_y=cols_y)
        smat = build_score_matrix(a, b, fit)
        plan = find_matches(smat, spec.m, d_b=b.d)
        with warnings.catch_warnings():
            # extreme-propensity warnings are expected wholesale in the
            # distorted-covariate modes; the report carries the numbers
            warnings.simplefilter("ignore", ExtremePropensityWarning)
            est = point_estimates(plan, fit, a, b)
        out.update(
            mu_b=est.mu_b,
            mu_b_debiased=est.mu_b_debiased,
            mu_dsm=est.mu_dsm,
            mu_dsm_debiased=est.mu_dsm_debiased,
            dre=est.dre,
        )
        if spec.n_boot:
            bs = BootstrapSpec(n_draws=spec.n_boot, alpha=spec.alpha, seed=boot_seed)
            ci_b = bootstrap_ci_debiased(plan, fit, a, b, est.mu_b_debiased, bs)
            ci_p = bootstrap_ci_population(plan, fit, a, b, est.mu_dsm_debiased, bs)
            out["cover_b"] = float(ci_b.lo < out["target_b"] < ci_b.hi)
            out["cover_pop"] = float(ci_p.lo < out["target_pop"] < ci_p.hi)
    except DsmError as err:
        return "fail", type(err).__name__
    return "ok", out


def _replicate_star(args):
    return _replicate(*args)


def _worker_count(requested) -> int:
    if requested is not None:
        return max(1, int(requested))
    env = os.environ.get("DSM_THREADS", "").strip()
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValueError(f"DSM_THREADS must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


# Estimator name -> target series it chases.
_TARGET_OF = {
    "sample_a_mean": "target_pop",
    "mu_b": "target_b",
    "mu_b_debiased": "target_b",
    "mu_dsm": "target_pop",
    "mu_dsm_debiased": "target_pop",
    "dre": "target_pop",
}
_COVER_OF = {"mu_b_debiased": "cover_b", "mu_dsm_debiased": "cover_pop"}


@dataclass(frozen=True)
class EstimatorRow:
    """Monte Carlo summary of one estimator: average estimate, relative
    bias in percent, mean squared error, and interval coverage when
    intervals were run."""

    name: str
    target: str
    mean: float
    rb_pct: float
    mse: float
    coverage: float | None = None


@dataclass(frozen=True)
class SimReport:
    """Raw per-replication results of one Monte Carlo run.

    estimates/targets/coverage hold aligned arrays over the successful
    replications, in replication order; failures lists the error class
    name of each dropped replication.
    """

    spec: ScenarioSpec
    n_ok: int
    n_failed: int
    failures: tuple
    estimates: dict
    targets: dict
    coverage: dict
    seconds: float

    def target_mean(self, key: str) -> float:
        return float(self.targets[key].mean())

    def summary(self, name: str) -> EstimatorRow:
        est = self.estimates[name]
        tgt = self.targets[_TARGET_OF[name]]
        cov = None
        flag_key = _COVER_OF.get(name)
        if flag_key in self.coverage:
            cov = float(self.coverage[flag_key].mean())
        return EstimatorRow(
            name=name,
            target=_TARGET_OF[name],
            mean=float(est.mean()),
            rb_pct=float(((est - tgt) / tgt).mean() * 100.0),
            mse=float(((est - tgt) ** 2).mean()),
            coverage=cov,
        )

    def rows(self):
        return [self.summary(name) for name in _TARGET_OF]


def run_monte_carlo(spec: ScenarioSpec) -> SimReport:
    """Run spec.n_reps replications of one scenario.

    Replications failing with a package error (separation, rank loss,
    domain problems) are dropped and counted; everything else is
    aggregated in replication order, so reports are bit-identical for a
    given spec no matter the worker count (set via spec.workers, the
    DSM_THREADS environment variable, or the CPU count, in that order).
    """
    t0 = time.perf_counter()
    workers = _worker_count(spec.workers)
    if workers > 1 and spec.n_reps > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunk = max(1, spec.n_reps // (workers * 8))
            results = list(
                pool.map(_replicate_star, zip(repeat(spec), range(spec.n_reps)), chunksize=chunk)
            )
    else:
        results = [_replicate(spec, s) for s in range(spec.n_reps)]

    ok = [payload for status, payload in results if status == "ok"]
    failures = tuple(payload for status, payload in results if status != "ok")
    if not ok:
        raise DsmError("every replication failed; nothing to aggregate")

    keys = ok[0].keys()
    series = {k: np.array([r[k] for r in ok]) for k in keys}
    coverage = {k: series.pop(k) for k in ("cover_b", "cover_pop") if k in series}
    targets = {k: series.pop(k) for k in ("target_b", "target_pop")}
    return SimReport(
        spec=spec,
        n_ok=len(ok),
        n_failed=len(failures),
        failures=failures,
        estimates=series,
        targets=targets,
        coverage=coverage,
        seconds=time.perf_counter() - t0,
    )


def run_scenario_table(base: ScenarioSpec, scenarios=SCENARIOS) -> dict:
    """Run every scenario under a shared seed (identical replication
    data; only the model views differ) and return {scenario: SimReport}."""
    return {sc: run_monte_carlo(replace(base, scenario=sc)) for sc in scenarios}


def run_coverage_grid(base: ScenarioSpec, grid=COVERAGE_GRID, scenarios=SCENARIOS):
    """Run the coverage study rows; returns a list of dicts with the row
    sizes and {scenario: SimReport} under each."""
    out = []
    for m, n_a, n_b in grid:
        row_spec = replace(base, m=m, n_a=n_a, n_b=n_b)
        out.append({"m": m, "n_a": n_a, "n_b": n_b, "reports": run_scenario_table(row_spec, scenarios)})
    return out
