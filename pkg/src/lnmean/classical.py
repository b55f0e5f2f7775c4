"""Classical procedures for the common lognormal mean.

All of these assume the (a=1, b=-0.5) model on the log scale: a pooled Wald
estimator with per-group delta-method variances (ahmed), the quadratic
acceptance-set interval built from the same components (baklizi), maximum
likelihood with an asymptotic-variance Wald interval for two groups
(gupta-li), and a profile likelihood-ratio test (lrt).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .model import Dataset, KnownVarianceSpec, umvue_known_variance
from .outcomes import (Alternative, IntervalOutcome, TestOutcome,
                       interval_from_log, interval_from_phi)

_SIGMA2_FLOOR = 1e-12


def _require_lognormal(ds: Dataset) -> None:
    if not ds.model.is_lognormal_mean:
        raise ValueError("defined for the lognormal-mean model (a=1, b=-0.5) only")


def _require_phi0(phi0: float) -> float:
    if not (math.isfinite(phi0) and phi0 > 0.0):
        raise ValueError("phi0 must be finite and positive")
    return math.log(phi0)


# ---------------------------------------------------------------------------
# pooled Wald estimator and acceptance-set interval


@dataclass(frozen=True)
class AhmedComponents:
    """Per-group lognormal-mean estimates and their pooled combination.

    ``sigma2_hats`` are the n-divisor group variances, ``theta_hats`` the
    per-group mean estimates exp(mean + sigma2/2), ``v_hats`` the
    delta-method variances, and ``theta_tilde`` the inverse-variance pooled
    estimate with standard error ``std_error``.
    """

    mu_hats: tuple[float, ...]
    sigma2_hats: tuple[float, ...]
    theta_hats: tuple[float, ...]
    v_hats: tuple[float, ...]
    theta_tilde: float
    std_error: float


def ahmed_components(ds: Dataset) -> AhmedComponents:
    _require_lognormal(ds)
    n = ds.counts()
    mu_hat = ds.means()
    sigma2 = (n - 1) / n * ds.variances()
    theta = np.exp(mu_hat + 0.5 * sigma2)
    v = sigma2 * (1.0 + 0.5 * sigma2) * np.exp(2.0 * mu_hat + sigma2)
    weights = n / v
    total = float(np.sum(weights))
    return AhmedComponents(
        mu_hats=tuple(mu_hat),
        sigma2_hats=tuple(sigma2),
        theta_hats=tuple(theta),
        v_hats=tuple(v),
        theta_tilde=float(np.sum(weights * theta) / total),
        std_error=total ** -0.5,
    )


def ahmed_ci(ds: Dataset, level: float = 0.95) -> IntervalOutcome:
    """Wald interval theta_tilde +/- z * SE on the original scale."""
    comp = ahmed_components(ds)
    z = stats.norm.ppf((1.0 + level) / 2.0)
    return interval_from_phi(comp.theta_tilde - z * comp.std_error,
                             comp.theta_tilde + z * comp.std_error,
                             level, method="ahmed", estimate=comp.theta_tilde)


def ahmed_test(ds: Dataset, phi0: float,
               alternative: Alternative = Alternative.TWO_SIDED) -> TestOutcome:
    """Wald test of the pooled estimate against phi0 on the original scale."""
    _require_phi0(phi0)
    comp = ahmed_components(ds)
    z = (comp.theta_tilde - phi0) / comp.std_error
    p = _wald_pvalue(z, alternative)
    return TestOutcome(p_value=p, mc_std_error=0.0, reps_used=0, method="ahmed", statistic=z)


def baklizi_ci(ds: Dataset, level: float = 0.95) -> IntervalOutcome | None:
    """Interval of all theta accepted by the pooled quadratic criterion.

    The acceptance region sum_i n_i (theta_hat_i - theta)^2 / v_hat_i <= q,
    with q the level quantile of chi-square(k), is a parabola in theta; its
    two roots bound the interval.  Returns ``None`` when the parabola's
    minimum already exceeds q (group estimates too far apart for any common
    value), which callers should treat as a failed interval rather than an
    error.
    """
    comp = ahmed_components(ds)
    q = stats.chi2.ppf(level, df=ds.k)
    n = ds.counts()
    theta = np.asarray(comp.theta_hats)
    w = n / np.asarray(comp.v_hats)
    a = float(np.sum(w))
    b = -2.0 * float(np.sum(w * theta))
    c = float(np.sum(w * theta ** 2)) - q
    disc = b * b - 4.0 * a * c
    if disc < 0.0:
        return None
    root = math.sqrt(disc)
    return interval_from_phi((-b - root) / (2.0 * a), (-b + root) / (2.0 * a),
                             level, method="baklizi", estimate=-b / (2.0 * a))


# ---------------------------------------------------------------------------
# maximum likelihood, Wald interval for two groups, likelihood-ratio test


@dataclass(frozen=True)
class MleResult:
    """Maximum-likelihood fit of (mu, sigma^2_1..k)."""

    mu_hat: float
    sigma2_hats: tuple[float, ...]
    log_likelihood: float
    iterations: int
    converged: bool


def log_likelihood(ds: Dataset, mu: float, sigma2s) -> float:
    """Joint log-likelihood of the log-scale data at (mu, sigma^2), from summaries.

    Group i contributes a normal likelihood with mean mu - sigma_i^2 / 2,
    rewritten in terms of (n_i, ybar_i, s_i^2).
    """
    _require_lognormal(ds)
    v = np.asarray(sigma2s, dtype=float)
    if v.shape != (ds.k,):
        raise ValueError(f"need exactly {ds.k} variances")
    if np.any(v <= 0.0):
        raise ValueError("variances must be strictly positive")
    n = ds.counts()
    quad = (n - 1) * ds.variances() + n * (ds.means() - mu + v / 2.0) ** 2
    return float(np.sum(-0.5 * n * np.log(2.0 * math.pi * v) - quad / (2.0 * v)))


def constrained_sigma2(ds: Dataset, mu: float) -> np.ndarray:
    """Per-group variance maximizers at fixed mu.

    The score equation in sigma_i^2 reduces to the quadratic
    v^2 + 4v - 4 Q_i / n_i = 0 with Q_i = (n_i-1) s_i^2 + n_i (ybar_i - mu)^2,
    whose unique positive root is the maximizer.
    """
    _require_lognormal(ds)
    n = ds.counts()
    quad = (n - 1) * ds.variances() + n * (ds.means() - mu) ** 2
    return np.maximum(2.0 * (np.sqrt(1.0 + quad / n) - 1.0), _SIGMA2_FLOOR)


def _mu_given_sigma2(ds: Dataset, sigma2s: np.ndarray) -> float:
    # the conditional maximizer in mu is the known-variance estimator
    return umvue_known_variance(ds, KnownVarianceSpec(tuple(sigma2s)))[0]


def gupta_li_mle(ds: Dataset, start_sigma2=None, max_iter: int = 2000,
                 ll_tol: float = 1e-12, param_tol: float = 1e-10) -> MleResult:
    """Maximize the joint log-likelihood by alternating exact coordinate steps.

    Each sweep sets mu to its closed-form conditional maximizer given the
    variances, then each variance to the positive root of its score equation
    given mu, so the log-likelihood never decreases.  Stops when both the
    relative log-likelihood change is below ``ll_tol`` and the largest
    parameter change is below ``param_tol``; a non-converged result is
    returned (flagged) rather than raised.
    """
    _require_lognormal(ds)
    if start_sigma2 is None:
        n = ds.counts()
        v = np.maximum((n - 1) / n * ds.variances(), _SIGMA2_FLOOR)
    else:
        v = np.maximum(np.asarray(start_sigma2, dtype=float), _SIGMA2_FLOOR)
        if v.shape != (ds.k,):
            raise ValueError(f"need exactly {ds.k} starting variances")
    mu = _mu_given_sigma2(ds, v)
    ll = log_likelihood(ds, mu, v)
    iterations = 0
    converged = False
    for iterations in range(1, max_iter + 1):
        v_new = constrained_sigma2(ds, mu)
        mu_new = _mu_given_sigma2(ds, v_new)
        ll_new = log_likelihood(ds, mu_new, v_new)
        delta = max(abs(mu_new - mu), float(np.max(np.abs(v_new - v))))
        small_ll = abs(ll_new - ll) <= ll_tol * (1.0 + abs(ll_new))
        mu, v, ll = mu_new, v_new, ll_new
        if small_ll and delta < param_tol:
            converged = True
            break
    return MleResult(mu_hat=mu, sigma2_hats=tuple(v), log_likelihood=ll,
                     iterations=iterations, converged=converged)


def _gupta_li_sd(ds: Dataset, sigma2_hats) -> float:
    if ds.k != 2:
        raise ValueError("the asymptotic variance formula is defined for exactly two groups")
    n1, n2 = (int(x) for x in ds.counts())
    v1, v2 = (float(x) for x in sigma2_hats)
    g1 = 2.0 * n1 / v1 + n1
    g2 = 2.0 * n2 / v2 + n2
    var = g1 * g2 / (2.0 * n1 ** 2 / v1 ** 2 * g2 + 2.0 * n2 ** 2 / v2 ** 2 * g1)
    return math.sqrt(var)


def _fit_or_raise(ds: Dataset) -> MleResult:
    fit = gupta_li_mle(ds)
    if not fit.converged:
        raise RuntimeError(f"ML fit did not converge in {fit.iterations} iterations")
    return fit


def gupta_li_ci(ds: Dataset, level: float = 0.95) -> IntervalOutcome:
    """Wald interval exp(mu_hat +/- z * SD(mu_hat)) for two groups."""
    _require_lognormal(ds)
    if ds.k != 2:
        raise ValueError("gupta-li requires exactly two groups")
    fit = _fit_or_raise(ds)
    sd = _gupta_li_sd(ds, fit.sigma2_hats)
    z = stats.norm.ppf((1.0 + level) / 2.0)
    return interval_from_log(fit.mu_hat - z * sd, fit.mu_hat + z * sd, level,
                             method="gupta-li", estimate=math.exp(fit.mu_hat))


def gupta_li_test(ds: Dataset, phi0: float) -> TestOutcome:
    """Two-sided Wald test of mu = ln(phi0) on the log scale, two groups."""
    _require_lognormal(ds)
    if ds.k != 2:
        raise ValueError("gupta-li requires exactly two groups")
    mu0 = _require_phi0(phi0)
    fit = _fit_or_raise(ds)
    z = (fit.mu_hat - mu0) / _gupta_li_sd(ds, fit.sigma2_hats)
    p = 2.0 * stats.norm.sf(abs(z))
    return TestOutcome(p_value=min(p, 1.0), mc_std_error=0.0, reps_used=0,
                       method="gupta-li", statistic=z)


def lr_test(ds: Dataset, phi0: float) -> TestOutcome:
    """Profile likelihood-ratio test of mu = ln(phi0), chi-square(1) calibrated.

    The unconstrained fit is also restarted from the constrained maximizer,
    so the reported statistic is nonnegative by monotonicity of the ascent.
    """
    _require_lognormal(ds)
    mu0 = _require_phi0(phi0)
    v0 = constrained_sigma2(ds, mu0)
    ll0 = log_likelihood(ds, mu0, v0)
    fit = gupta_li_mle(ds)
    refit = gupta_li_mle(ds, start_sigma2=v0)
    best = max(fit, refit, key=lambda r: r.log_likelihood)
    if not best.converged:
        raise RuntimeError(f"ML fit did not converge in {best.iterations} iterations")
    lam = max(2.0 * (best.log_likelihood - ll0), 0.0)  # clamp float residue
    return TestOutcome(p_value=float(stats.chi2.sf(lam, df=1)), mc_std_error=0.0,
                       reps_used=0, method="lrt", statistic=lam)


def _wald_pvalue(z: float, alternative) -> float:
    alternative = Alternative.coerce(alternative)
    if alternative is Alternative.GREATER:
        return float(stats.norm.sf(z))
    if alternative is Alternative.LESS:
        return float(stats.norm.cdf(z))
    return float(min(2.0 * stats.norm.sf(abs(z)), 1.0))
