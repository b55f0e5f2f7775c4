import math

import numpy as np
import pytest
from scipy import optimize, stats

from lnmean import (COMMON_NORMAL_MEAN, LOGNORMAL_MEAN, Dataset, KnownVarianceSpec,
                    SampleSummary, ahmed_ci, ahmed_components, ahmed_test,
                    baklizi_ci, constrained_sigma2, gupta_li_ci, gupta_li_mle,
                    gupta_li_test, log_likelihood, lr_test, rmrs_dataset,
                    umvue_known_variance)

RMRS = rmrs_dataset()
PHI0 = 20000.0


def _dataset(rng, k, n_range=(4, 40)):
    groups = tuple(SampleSummary(int(rng.integers(*n_range)), float(rng.normal()),
                                 float(rng.uniform(0.2, 3.0))) for _ in range(k))
    return Dataset(groups=groups, model=LOGNORMAL_MEAN)


def _rel_close(value, target, rel):
    assert abs(value - target) <= rel * abs(target), f"{value} vs {target}"


# ---------------------------------------------------------------------------
# pooled Wald estimator


def test_ahmed_rmrs_interval():
    interval = ahmed_ci(RMRS, 0.95)
    _rel_close(interval.phi_lower, 15831.21, 0.003)
    _rel_close(interval.phi_upper, 27720.26, 0.003)


def test_ahmed_rmrs_pvalue():
    outcome = ahmed_test(RMRS, PHI0)
    assert outcome.p_value == pytest.approx(0.5582, abs=0.005)


def test_ahmed_single_group_reduction():
    ds = Dataset(groups=(SampleSummary(12, 0.8, 1.1),), model=LOGNORMAL_MEAN)
    comp = ahmed_components(ds)
    interval = ahmed_ci(ds, 0.95)
    z = stats.norm.ppf(0.975)
    half = z * math.sqrt(comp.v_hats[0] / 12)
    assert interval.phi_lower == pytest.approx(comp.theta_hats[0] - half, rel=1e-12)
    assert interval.phi_upper == pytest.approx(comp.theta_hats[0] + half, rel=1e-12)


def test_ahmed_duplicated_group_shrinks_width():
    group = SampleSummary(15, 1.0, 0.9)
    single = ahmed_ci(Dataset(groups=(group,), model=LOGNORMAL_MEAN))
    double = ahmed_ci(Dataset(groups=(group, group), model=LOGNORMAL_MEAN))
    assert double.estimate == pytest.approx(single.estimate, rel=1e-12)
    assert double.width == pytest.approx(single.width / math.sqrt(2.0), rel=1e-12)


def test_ahmed_pooled_estimate_is_convex_combination():
    rng = np.random.default_rng(81)
    for _ in range(25):
        comp = ahmed_components(_dataset(rng, int(rng.integers(1, 5))))
        assert min(comp.theta_hats) - 1e-9 <= comp.theta_tilde <= max(comp.theta_hats) + 1e-9


def test_ahmed_test_at_pooled_estimate_and_endpoint():
    comp = ahmed_components(RMRS)
    assert ahmed_test(RMRS, comp.theta_tilde).p_value == pytest.approx(1.0, abs=1e-12)
    interval = ahmed_ci(RMRS, 0.95)
    assert ahmed_test(RMRS, interval.phi_upper).p_value == pytest.approx(0.05, abs=1e-10)


def test_ahmed_requires_lognormal_model():
    ds = Dataset(groups=(SampleSummary(5, 0.0, 1.0),), model=COMMON_NORMAL_MEAN)
    with pytest.raises(ValueError, match="lognormal"):
        ahmed_ci(ds)


# ---------------------------------------------------------------------------
# acceptance-set interval


def test_baklizi_rmrs_interval():
    interval = baklizi_ci(RMRS, 0.95)
    _rel_close(interval.phi_lower, 14372.59, 0.003)
    _rel_close(interval.phi_upper, 29178.79, 0.003)


def test_baklizi_single_group_equals_ahmed():
    # with one group the chi-square(1) quantile is the squared normal quantile
    ds = Dataset(groups=(SampleSummary(9, 1.4, 0.8),), model=LOGNORMAL_MEAN)
    quad = baklizi_ci(ds, 0.95)
    wald = ahmed_ci(ds, 0.95)
    assert quad.phi_lower == pytest.approx(wald.phi_lower, rel=1e-9)
    assert quad.phi_upper == pytest.approx(wald.phi_upper, rel=1e-9)


def test_baklizi_identical_groups_center():
    group = SampleSummary(20, 0.5, 1.2)
    ds = Dataset(groups=(group, group, group), model=LOGNORMAL_MEAN)
    comp = ahmed_components(ds)
    interval = baklizi_ci(ds, 0.95)
    midpoint = 0.5 * (interval.phi_lower + interval.phi_upper)
    assert midpoint == pytest.approx(comp.theta_hats[0], rel=1e-9)


def test_baklizi_midpoint_level_free_and_width_monotone():
    ds = Dataset(groups=(SampleSummary(18, 0.9, 1.1), SampleSummary(25, 1.0, 0.8),
                         SampleSummary(12, 1.1, 1.4)), model=LOGNORMAL_MEAN)
    narrow = baklizi_ci(ds, 0.80)
    wide = baklizi_ci(ds, 0.99)
    mid_narrow = 0.5 * (narrow.phi_lower + narrow.phi_upper)
    mid_wide = 0.5 * (wide.phi_lower + wide.phi_upper)
    assert mid_narrow == pytest.approx(mid_wide, rel=1e-12)
    assert wide.width > narrow.width


def test_baklizi_empty_acceptance_set_returns_none():
    # far-apart group estimates with tiny dispersion: no theta is accepted
    groups = (SampleSummary(50, 0.0, 0.01), SampleSummary(50, 3.0, 0.01))
    assert baklizi_ci(Dataset(groups=groups, model=LOGNORMAL_MEAN), 0.95) is None


# ---------------------------------------------------------------------------
# maximum likelihood and the Wald interval


def test_gupta_li_mle_single_group_matches_grid_search():
    ds = Dataset(groups=(SampleSummary(11, 0.7, 1.6),), model=LOGNORMAL_MEAN)
    fit = gupta_li_mle(ds)
    assert fit.converged

    # brute-force oracle: refine a 2-d grid around the best point
    mu_lo, mu_hi = -2.0, 3.0
    v_lo, v_hi = 0.05, 8.0
    best = None
    for _ in range(7):
        mus = np.linspace(mu_lo, mu_hi, 81)
        vs = np.linspace(v_lo, v_hi, 81)
        grid_mu, grid_v = np.meshgrid(mus, vs, indexing="ij")
        n, ybar, s2 = 11, 0.7, 1.6
        quad = (n - 1) * s2 + n * (ybar - grid_mu + grid_v / 2.0) ** 2
        ll = -0.5 * n * np.log(2 * np.pi * grid_v) - quad / (2.0 * grid_v)
        i, j = np.unravel_index(np.argmax(ll), ll.shape)
        best = (mus[i], vs[j])
        dm, dv = mus[1] - mus[0], vs[1] - vs[0]
        mu_lo, mu_hi = best[0] - 2 * dm, best[0] + 2 * dm
        v_lo, v_hi = max(best[1] - 2 * dv, 1e-6), best[1] + 2 * dv
    assert fit.mu_hat == pytest.approx(best[0], abs=1e-5)
    assert fit.sigma2_hats[0] == pytest.approx(best[1], abs=1e-5)


def test_gupta_li_mle_never_below_start():
    rng = np.random.default_rng(83)
    for _ in range(20):
        ds = _dataset(rng, int(rng.integers(1, 4)))
        n = ds.counts()
        start = (n - 1) / n * ds.variances()
        fit = gupta_li_mle(ds)
        assert fit.converged
        # not worse than the moment initializer evaluated at its own best mu
        mu_start, _ = umvue_known_variance(ds, KnownVarianceSpec(tuple(start)))
        assert fit.log_likelihood >= log_likelihood(ds, mu_start, start) - 1e-9


def test_constrained_sigma2_solves_score_equation():
    rng = np.random.default_rng(84)
    ds = _dataset(rng, 3)
    mu = 0.4
    v = constrained_sigma2(ds, mu)
    # the conditional maximizer beats nearby variances, group by group
    for bump in (0.97, 1.03):
        assert log_likelihood(ds, mu, v) >= log_likelihood(ds, mu, v * bump)


def test_gupta_li_rmrs_interval_and_pvalue():
    interval = gupta_li_ci(RMRS, 0.95)
    _rel_close(interval.phi_lower, 16596.91, 0.003)
    _rel_close(interval.phi_upper, 28658.17, 0.003)
    assert gupta_li_test(RMRS, PHI0).p_value == pytest.approx(0.5343, abs=0.01)


def test_gupta_li_variance_symmetry_halves_single_group_value():
    # equal fits and equal sizes: the two-group variance is half the
    # single-group expression g / (2 n^2 / v^2) with g = 2n/v + n
    group = SampleSummary(30, 0.2, 1.0)
    ds = Dataset(groups=(group, group), model=LOGNORMAL_MEAN)
    fit = gupta_li_mle(ds)
    assert fit.sigma2_hats[0] == pytest.approx(fit.sigma2_hats[1], rel=1e-12)
    n, v = 30, fit.sigma2_hats[0]
    single = (2 * n / v + n) / (2.0 * n ** 2 / v ** 2)
    interval = gupta_li_ci(ds, 0.95)
    z = stats.norm.ppf(0.975)
    width_log = interval.upper - interval.lower
    assert width_log == pytest.approx(2 * z * math.sqrt(single / 2.0), rel=1e-9)


def test_gupta_li_requires_two_groups():
    rng = np.random.default_rng(85)
    for k in (1, 3):
        ds = _dataset(rng, k)
        with pytest.raises(ValueError, match="two groups"):
            gupta_li_ci(ds)
        with pytest.raises(ValueError, match="two groups"):
            gupta_li_test(ds, 1.0)


# ---------------------------------------------------------------------------
# likelihood-ratio test


def test_lr_rmrs_pvalue():
    assert lr_test(RMRS, PHI0).p_value == pytest.approx(0.5245, abs=0.01)


def test_lr_at_the_mle_is_one():
    fit = gupta_li_mle(RMRS)
    outcome = lr_test(RMRS, math.exp(fit.mu_hat))
    assert outcome.statistic == pytest.approx(0.0, abs=1e-9)
    assert outcome.p_value > 0.999


def test_lr_statistic_nonnegative():
    rng = np.random.default_rng(86)
    for _ in range(1000):
        ds = _dataset(rng, int(rng.integers(1, 4)), n_range=(3, 25))
        phi0 = float(np.exp(rng.normal(ds.means().mean(), 1.0)))
        assert lr_test(ds, phi0).statistic >= 0.0


def test_lr_agrees_with_direct_joint_maximization():
    rng = np.random.default_rng(87)
    for _ in range(5):
        ds = _dataset(rng, 2)
        phi0 = float(np.exp(rng.normal(ds.means().mean(), 0.4)))
        ours = lr_test(ds, phi0).statistic

        def negative_ll(theta, ds=ds):
            return -log_likelihood(ds, theta[0], np.exp(theta[1:]))

        start = np.concatenate([[ds.means().mean()], np.log(ds.variances())])
        res = optimize.minimize(negative_ll, start, method="Nelder-Mead",
                                options={"xatol": 1e-12, "fatol": 1e-13,
                                         "maxiter": 40_000, "maxfev": 40_000})
        mu0 = math.log(phi0)
        ll0 = log_likelihood(ds, mu0, constrained_sigma2(ds, mu0))
        direct = 2.0 * (-res.fun - ll0)
        assert ours == pytest.approx(direct, abs=1e-6)


def test_lr_requires_positive_phi0():
    with pytest.raises(ValueError, match="positive"):
        lr_test(RMRS, -3.0)


# ---------------------------------------------------------------------------
# shared behavior


def test_all_methods_permutation_invariant():
    rng = np.random.default_rng(88)
    ds = _dataset(rng, 2)
    flipped = Dataset(groups=ds.groups[::-1], model=ds.model)
    assert ahmed_ci(ds).phi_lower == pytest.approx(ahmed_ci(flipped).phi_lower, rel=1e-12)
    assert baklizi_ci(ds).phi_upper == pytest.approx(baklizi_ci(flipped).phi_upper, rel=1e-12)
    assert gupta_li_test(ds, 2.0).p_value == pytest.approx(
        gupta_li_test(flipped, 2.0).p_value, rel=1e-9)
    assert lr_test(ds, 2.0).p_value == pytest.approx(lr_test(flipped, 2.0).p_value, rel=1e-9)
