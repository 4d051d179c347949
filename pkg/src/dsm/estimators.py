"""Point estimators built on a match plan.

Two targets appear throughout: the mean outcome over the sample-B units
(mu_b family, unweighted over B) and the finite-population mean (mu_dsm
family, weighted by the design weights d_i).  Each has a matching-bias
correction that replaces matched outcomes with prognostic predictions.
A design-weighted doubly robust estimator is included for comparison.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ExtremePropensityWarning
from .matching import MatchPlan, impute
from .scores import SampleA, SampleB, ScoreFit

__all__ = [
    "PointEstimates",
    "mu_b",
    "bias_hat",
    "mu_b_debiased",
    "mu_dsm",
    "bias_hat_weighted",
    "mu_dsm_debiased",
    "dre_estimate",
    "point_estimates",
]

_PROPENSITY_FLOOR = 1e-6


@dataclass(frozen=True)
class PointEstimates:
    """All point estimates for one fitted-and-matched dataset."""

    mu_b: float
    bias_hat: float
    mu_b_debiased: float
    mu_dsm: float
    bias_hat_weighted: float
    mu_dsm_debiased: float
    dre: float
    n_hat: float


def mu_b(plan: MatchPlan, y_a) -> float:
    """Matching estimator of the sample-B outcome mean: the average of
    the imputed outcomes.  Equivalently sum(k_counts * y_a) / (m * n_b),
    since each donor's outcome enters once per match."""
    return float(impute(plan, y_a).mean())


def _donor_gaps(plan: MatchPlan, fit: ScoreFit, a: SampleA, b: SampleB) -> np.ndarray:
    """Per-B-unit prognostic gap: mean donor prediction minus own
    prediction.  Nonzero gaps measure how far matching had to reach."""
    g_a = fit.prognostic(a.x)
    g_b = fit.prognostic(b.x)
    return g_a[plan.j_sets].mean(axis=1) - g_b


def bias_hat(plan: MatchPlan, fit: ScoreFit, a: SampleA, b: SampleB) -> float:
    """Estimated matching bias of mu_b: the average prognostic gap."""
    return float(_donor_gaps(plan, fit, a, b).mean())


def mu_b_debiased(plan: MatchPlan, fit: ScoreFit, a: SampleA, b: SampleB) -> float:
    """Bias-corrected sample-B mean: mu_b minus the estimated matching
    bias.  Identical to imputing prognostic residuals and adding back
    each B-unit's own prediction."""
    return mu_b(plan, a.y) - bias_hat(plan, fit, a, b)


def mu_dsm(plan: MatchPlan, y_a, b: SampleB) -> float:
    """Design-weighted matching estimator of the population mean."""
    yhat = impute(plan, y_a)
    return float(b.d @ yhat / b.d.sum())


def bias_hat_weighted(plan: MatchPlan, fit: ScoreFit, a: SampleA, b: SampleB) -> float:
    """Design-weighted version of the matching-bias estimate."""
    return float(b.d @ _donor_gaps(plan, fit, a, b) / b.d.sum())


def mu_dsm_debiased(plan: MatchPlan, fit: ScoreFit, a: SampleA, b: SampleB) -> float:
    """Bias-corrected population mean: mu_dsm minus the weighted bias
    estimate.  Reduces to mu_b_debiased under unit weights."""
    return mu_dsm(plan, a.y, b) - bias_hat_weighted(plan, fit, a, b)


def dre_estimate(fit: ScoreFit, a: SampleA, b: SampleB) -> float:
    """Doubly robust population-mean estimator.

    Inverse-propensity-weighted prognostic residuals from sample A plus
    the design-weighted mean prediction from sample B, each term
    normalized by its own estimated population size (sum of 1/f over A,
    sum of d over B).  Warns when any fitted propensity drops below
    1e-6, since the residual term then rests on a handful of units.
    """
    f_a = fit.propensity(a.x)
    if np.min(f_a) < _PROPENSITY_FLOOR:
        warnings.warn(
            f"minimum fitted propensity {np.min(f_a):.3g} is below "
            f"{_PROPENSITY_FLOOR:g}; inverse weighting may be unstable",
            ExtremePropensityWarning,
            stacklevel=2,
        )
    resid = a.y - fit.prognostic(a.x)
    inv_f = 1.0 / f_a
    term_a = float(inv_f @ resid / inv_f.sum())
    term_b = float(b.d @ fit.prognostic(b.x) / b.d.sum())
    return term_a + term_b


def point_estimates(plan: MatchPlan, fit: ScoreFit, a: SampleA, b: SampleB) -> PointEstimates:
    """Compute every estimator once and collect the results."""
    yhat = impute(plan, a.y)
    gaps = _donor_gaps(plan, fit, a, b)
    n_hat = float(b.d.sum())
    mb = float(yhat.mean())
    bh = float(gaps.mean())
    md = float(b.d @ yhat / n_hat)
    bhw = float(b.d @ gaps / n_hat)
    return PointEstimates(
        mu_b=mb,
        bias_hat=bh,
        mu_b_debiased=mb - bh,
        mu_dsm=md,
        bias_hat_weighted=bhw,
        mu_dsm_debiased=md - bhw,
        dre=dre_estimate(fit, a, b),
        n_hat=n_hat,
    )
