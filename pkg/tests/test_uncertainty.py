"""Residual-variance estimates, the analytic variance, and the wild
bootstrap: hand values, moment checks, an independently coded replicate
evaluator, and the determinism contract."""

import numpy as np
import pytest

import dsm.uncertainty as unc
from dsm import (
    MAMMEN_NEG,
    MAMMEN_P_NEG,
    MAMMEN_POS,
    BootstrapSpec,
    InnerNeighbors,
    MatchPlan,
    SampleA,
    SampleB,
    ScoreFit,
    analytic_variance,
    bootstrap_ci_debiased,
    bootstrap_ci_plain,
    bootstrap_ci_population,
    mammen_draw,
    sigma2_homoskedastic,
    sigma2_unit,
    sigma2_units,
)


def inner_from(l_sets):
    l_sets = np.asarray(l_sets, dtype=np.intp)
    return InnerNeighbors(j=l_sets.shape[1], l_sets=l_sets)


def plan_from(j_sets, n_a, d_b=None):
    j_sets = np.asarray(j_sets, dtype=np.intp)
    m = j_sets.shape[1]
    k = np.bincount(j_sets.ravel(), minlength=n_a)
    if d_b is None:
        kw = k.astype(float)
    else:
        kw = np.bincount(
            j_sets.ravel(), weights=np.repeat(np.asarray(d_b, float), m), minlength=n_a
        )
    return MatchPlan(
        m=m,
        j_sets=j_sets,
        distances=np.zeros_like(j_sets, dtype=float),
        k_counts=k,
        k_weighted=kw,
    )


def linear_fit(intercept, slope):
    return ScoreFit(
        theta_r=np.array([0.0, 0.0]),
        theta_y=np.array([float(intercept), float(slope)]),
        converged=True,
        iterations=1,
        grad_norm=0.0,
        sd_f=1.0,
        sd_g=1.0,
        cols_r=None,
        cols_y=None,
    )


# -- residual variances -------------------------------------------------

def test_sigma2_unit_hand_value():
    # J=1, own y 2, neighbor y 0: (1/2) * (2-0)^2 = 2.
    inner = inner_from([[1], [0]])
    assert sigma2_unit(inner, np.array([2.0, 0.0]), 0) == pytest.approx(2.0, abs=1e-14)


def test_sigma2_unit_equal_neighborhood():
    inner = inner_from([[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]])
    y = np.array([1.0, 1.0, 1.0, 1.0])
    assert sigma2_unit(inner, y, 0) == 0.0


def test_sigma2_units_constant_outcome():
    inner = inner_from([[1], [0], [1]])
    assert np.all(sigma2_units(inner, np.full(3, 4.0)) == 0.0)


def test_sigma2_homoskedastic_averages():
    # Per-unit values come out {0, 0, 2, 2}; their mean is 1.
    inner = inner_from([[1], [0], [3], [2]])
    y = np.array([1.0, 1.0, 3.0, 1.0])
    assert np.allclose(sigma2_units(inner, y), [0.0, 0.0, 2.0, 2.0])
    assert sigma2_homoskedastic(inner, y) == pytest.approx(1.0, abs=1e-14)


def test_sigma2_homoskedastic_equal_units():
    inner = inner_from([[1], [0]])
    y = np.array([2.0, 0.0])
    assert sigma2_homoskedastic(inner, y) == pytest.approx(2.0, abs=1e-14)


def test_analytic_variance_no_reuse_drops_matching_term():
    # Every donor used exactly once: k*(k-1) = 0 leaves the spread term.
    y = np.array([1.0, 2.0, 5.0])
    plan = plan_from([[0], [1], [2]], n_a=3)
    inner = inner_from([[1], [0], [1]])
    mu = float(y.mean())
    v = analytic_variance(plan, y, mu, inner)
    assert v == pytest.approx(float(((y - mu) ** 2).mean()), abs=1e-14)


def test_analytic_variance_constant_outcome():
    plan = plan_from([[0, 1], [1, 2]], n_a=3)
    inner = inner_from([[1], [0], [1]])
    assert analytic_variance(plan, np.full(3, 3.0), 3.0, inner) == 0.0


def test_analytic_variance_direct_formula():
    y = np.array([1.0, 4.0, 2.0, 0.0])
    plan = plan_from([[0, 1], [1, 2], [1, 3]], n_a=4)
    inner = inner_from([[1], [2], [1], [0]])
    mu = 1.9
    yhat = y[plan.j_sets].mean(axis=1)
    s2 = (1.0 / 2.0) * (y - y[inner.l_sets[:, 0]]) ** 2
    k = plan.k_counts
    expected = float(((yhat - mu) ** 2).mean()) + float(
        (k * (k - 1) / plan.m**2 * s2).sum()
    ) / plan.n_b
    assert analytic_variance(plan, y, mu, inner) == pytest.approx(expected, abs=1e-14)


def test_analytic_variance_homoskedastic_variant():
    y = np.array([1.0, 4.0, 2.0, 0.0])
    plan = plan_from([[0, 1], [1, 2], [1, 3]], n_a=4)
    inner = inner_from([[1], [2], [1], [0]])
    s2_bar = sigma2_homoskedastic(inner, y)
    yhat = y[plan.j_sets].mean(axis=1)
    k = plan.k_counts
    expected = float(((yhat - 1.9) ** 2).mean()) + s2_bar * float(
        (k * (k - 1) / plan.m**2).sum()
    ) / plan.n_b
    got = analytic_variance(plan, y, 1.9, inner, homoskedastic=True)
    assert got == pytest.approx(expected, abs=1e-14)


# -- multiplier distribution --------------------------------------------

def test_mammen_support_and_probability():
    assert MAMMEN_NEG == pytest.approx(-(np.sqrt(5) - 1) / 2)
    assert MAMMEN_POS == pytest.approx((np.sqrt(5) + 1) / 2)
    assert MAMMEN_P_NEG == pytest.approx((np.sqrt(5) + 1) / (2 * np.sqrt(5)))
    draws = mammen_draw(np.random.default_rng(0), 1000)
    assert set(np.unique(draws)) == {MAMMEN_NEG, MAMMEN_POS}


def test_mammen_scalar_draw():
    val = mammen_draw(np.random.default_rng(1))
    assert val in (MAMMEN_NEG, MAMMEN_POS)


def test_mammen_moments():
    # Mean, variance, and third moment should be (0, 1, 1).  SEs of the
    # sample moments at n draws: 1/sqrt(n), sqrt(E w^4 - 1)/sqrt(n) = 1/sqrt(n),
    # sqrt(E w^6 - 1)/sqrt(n) = 2/sqrt(n).
    n = 10**6
    w = mammen_draw(np.random.default_rng(202), n)
    se = 1.0 / np.sqrt(n)
    assert abs(w.mean()) < 4 * se
    assert abs(np.mean(w**2) - 1.0) < 4 * se
    assert abs(np.mean(w**3) - 1.0) < 4 * 2 * se


# -- bootstrap intervals ------------------------------------------------

def test_plain_degenerate_interval():
    y = np.full(4, 2.5)
    plan = plan_from([[0, 1], [2, 3]], n_a=4)
    report = bootstrap_ci_plain(plan, y, 2.5, BootstrapSpec(n_draws=50, seed=3))
    assert report.lo == report.hi == report.point == 2.5
    assert np.all(report.draws == 0.0)


def test_plain_orientation():
    rng = np.random.default_rng(21)
    y = rng.normal(size=6)
    plan = plan_from([[0, 1], [2, 3], [4, 5], [1, 2]], n_a=6)
    report = bootstrap_ci_plain(plan, y, float(y.mean()), BootstrapSpec(n_draws=500, seed=4))
    assert report.lo <= report.hi
    assert report.lo == pytest.approx(report.point - report.q_hi)
    assert report.hi == pytest.approx(report.point - report.q_lo)


def test_plain_conditional_variance():
    # Unit-variance independent multipliers: Var(q) over replicates is
    # sum(resid^2) / n_b^2 exactly; the sample variance at B = 1e5 should
    # sit within a few percent.
    rng = np.random.default_rng(22)
    y = rng.normal(size=20)
    j_sets = np.array([rng.choice(20, size=3, replace=False) for _ in range(12)])
    plan = plan_from(j_sets, n_a=20)
    point = 0.3
    report = bootstrap_ci_plain(plan, y, point, BootstrapSpec(n_draws=10**5, seed=5))
    resid = plan.k_counts * (y - point) / plan.m
    target = float(resid @ resid) / plan.n_b**2
    assert np.var(report.draws) == pytest.approx(target, rel=0.05)


def test_seed_determinism_bit_for_bit():
    rng = np.random.default_rng(23)
    y = rng.normal(size=8)
    plan = plan_from([[0, 1], [2, 3], [4, 5]], n_a=8)
    spec = BootstrapSpec(n_draws=300, seed=77)
    r1 = bootstrap_ci_plain(plan, y, 0.0, spec)
    r2 = bootstrap_ci_plain(plan, y, 0.0, spec)
    assert np.array_equal(r1.draws, r2.draws)
    assert (r1.lo, r1.hi) == (r2.lo, r2.hi)
    r3 = bootstrap_ci_plain(plan, y, 0.0, BootstrapSpec(n_draws=300, seed=78))
    assert not np.array_equal(r1.draws, r3.draws)


def test_chunk_size_invariance(monkeypatch):
    rng = np.random.default_rng(24)
    y = rng.normal(size=10)
    plan = plan_from([[0, 1], [2, 3], [4, 5], [6, 7]], n_a=10)
    spec = BootstrapSpec(n_draws=257, seed=9)
    full = bootstrap_ci_plain(plan, y, 0.1, spec)
    monkeypatch.setattr(unc, "_CHUNK_ELEMS", 16)
    tiny = bootstrap_ci_plain(plan, y, 0.1, spec)
    assert np.array_equal(full.draws, tiny.draws)


def test_debiased_zero_when_outcomes_match_constant_prognosis():
    fit = linear_fit(3.0, 0.0)
    a = SampleA(np.array([[0.0], [1.0], [2.0]]), np.full(3, 3.0))
    b = SampleB(np.array([[0.5], [1.5]]), np.ones(2))
    plan = plan_from([[0], [2]], n_a=3, d_b=b.d)
    report = bootstrap_ci_debiased(plan, fit, a, b, 3.0, BootstrapSpec(n_draws=40, seed=1))
    assert np.all(report.draws == 0.0)
    assert report.lo == report.hi == 3.0


def test_population_degenerate_with_exact_constant_prognosis():
    fit = linear_fit(-1.5, 0.0)
    a = SampleA(np.array([[0.0], [4.0]]), np.full(2, -1.5))
    b = SampleB(np.array([[1.0], [2.0]]), np.array([2.0, 7.0]))
    plan = plan_from([[0], [1]], n_a=2, d_b=b.d)
    report = bootstrap_ci_population(
        plan, fit, a, b, -1.5, BootstrapSpec(n_draws=40, seed=2)
    )
    assert np.all(report.draws == 0.0)


def test_population_reduces_to_debiased_under_unit_weights():
    rng = np.random.default_rng(25)
    fit = linear_fit(0.5, 1.2)
    a = SampleA(rng.normal(size=(7, 1)), rng.normal(size=7))
    b = SampleB(rng.normal(size=(5, 1)), np.ones(5))
    j_sets = np.array([rng.choice(7, size=2, replace=False) for _ in range(5)])
    plan = plan_from(j_sets, n_a=7, d_b=b.d)
    spec = BootstrapSpec(n_draws=400, seed=31)
    deb = bootstrap_ci_debiased(plan, fit, a, b, 1.1, spec)
    pop = bootstrap_ci_population(plan, fit, a, b, 1.1, spec)
    assert np.array_equal(deb.draws, pop.draws)
    assert (deb.lo, deb.hi) == (pop.lo, pop.hi)


def test_debiased_replicates_match_independent_evaluator():
    # Re-derive the replicate values from scratch: same counter-based
    # generator, A-columns first, two-point multipliers, normalized sum.
    rng = np.random.default_rng(26)
    fit = linear_fit(0.2, 0.8)
    a = SampleA(rng.normal(size=(4, 1)), rng.normal(size=4))
    b = SampleB(rng.normal(size=(2, 1)), np.array([2.0, 3.0]))
    plan = plan_from([[0, 1], [2, 3]], n_a=4, d_b=b.d)
    point = 0.45
    spec = BootstrapSpec(n_draws=64, seed=12345)
    report = bootstrap_ci_debiased(plan, fit, a, b, point, spec)

    gen = np.random.Generator(np.random.Philox(key=12345))
    u = gen.random((64, 6))
    w = np.where(u < MAMMEN_P_NEG, MAMMEN_NEG, MAMMEN_POS)
    ra = plan.k_counts * (a.y - fit.prognostic(a.x)) / plan.m
    rb = fit.prognostic(b.x) - point
    expected = (w[:, :4] @ ra + w[:, 4:] @ rb) / plan.n_b
    assert np.allclose(report.draws, expected, rtol=0.0, atol=1e-12)


def test_population_replicates_match_independent_evaluator():
    rng = np.random.default_rng(27)
    fit = linear_fit(-0.4, 1.1)
    a = SampleA(rng.normal(size=(4, 1)), rng.normal(size=4))
    b = SampleB(rng.normal(size=(2, 1)), np.array([1.5, 4.5]))
    plan = plan_from([[1, 2], [0, 3]], n_a=4, d_b=b.d)
    point = -0.2
    spec = BootstrapSpec(n_draws=32, seed=999)
    report = bootstrap_ci_population(plan, fit, a, b, point, spec)

    gen = np.random.Generator(np.random.Philox(key=999))
    u = gen.random((32, 6))
    w = np.where(u < MAMMEN_P_NEG, MAMMEN_NEG, MAMMEN_POS)
    ra = plan.k_weighted * (a.y - fit.prognostic(a.x)) / plan.m
    rb = b.d * (fit.prognostic(b.x) - point)
    expected = (w[:, :4] @ ra + w[:, 4:] @ rb) / b.d.sum()
    assert np.allclose(report.draws, expected, rtol=0.0, atol=1e-12)


def test_interval_nesting():
    rng = np.random.default_rng(28)
    y = rng.normal(size=12)
    plan = plan_from([[i, (i + 1) % 12] for i in range(8)], n_a=12)
    wide = bootstrap_ci_plain(plan, y, 0.0, BootstrapSpec(n_draws=2000, alpha=0.05, seed=6))
    narrow = bootstrap_ci_plain(plan, y, 0.0, BootstrapSpec(n_draws=2000, alpha=0.10, seed=6))
    assert wide.lo <= narrow.lo <= narrow.hi <= wide.hi


def test_bootstrap_spec_validation():
    with pytest.raises(ValueError):
        BootstrapSpec(n_draws=1)
    with pytest.raises(ValueError):
        BootstrapSpec(alpha=0.0)
    with pytest.raises(ValueError):
        BootstrapSpec(alpha=1.0)
    with pytest.raises(ValueError):
        BootstrapSpec(seed=-1)
