"""Aggregation statistics: Wilson score interval for success rates,
and profile-likelihood confidence intervals for means of gamma-
distributed (solved-at iterations) and [0, 0.5]-supported beta-
distributed (sparsity error) samples.

The profile interval for a mean m is {m : 2 * (l_hat - l_profile(m)) <=
chi2_1(confidence)}, where l_profile re-maximizes the nuisance shape
parameter at each fixed mean. Nuisance maximization uses safeguarded
Newton iterations on the digamma stationarity equation; the interval
bounds are bracketed by doubling steps and bisected to relative
tolerance 1e-8. digamma/trigamma are evaluated locally by recurrence
plus asymptotic series, good to ~1e-12.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats as sps


class InferenceError(ValueError):
    """Raised when a CI cannot be estimated (n < 2, bad support, all equal)."""


# ---------------------------------------------------------------------------
# Special functions
# ---------------------------------------------------------------------------

# Bernoulli-number coefficients of the asymptotic expansions.
_DIGAMMA_COEF = (
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
    1.0 / 12.0,
)
_TRIGAMMA_COEF = (
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
)
_ASYMPTOTIC_MIN = 12.0


def digamma(x: float) -> float:
    """d/dx ln Gamma(x) for x > 0."""
    if x <= 0.0:
        raise ValueError("digamma defined here for x > 0 only")
    value = 0.0
    while x < _ASYMPTOTIC_MIN:
        value -= 1.0 / x
        x += 1.0
    inv2 = 1.0 / (x * x)
    series = 0.0
    power = inv2
    for c in _DIGAMMA_COEF:
        series += c * power
        power *= inv2
    return value + math.log(x) - 0.5 / x - series


def trigamma(x: float) -> float:
    """d^2/dx^2 ln Gamma(x) for x > 0."""
    if x <= 0.0:
        raise ValueError("trigamma defined here for x > 0 only")
    value = 0.0
    while x < _ASYMPTOTIC_MIN:
        value += 1.0 / (x * x)
        x += 1.0
    inv = 1.0 / x
    inv2 = inv * inv
    series = 0.0
    power = inv * inv2
    for c in _TRIGAMMA_COEF:
        series += c * power
        power *= inv2
    return value + inv + 0.5 * inv2 + series


def _chi2_quantile_1df(confidence: float) -> float:
    z = sps.norm.ppf(0.5 + confidence / 2.0)
    return float(z * z)


# ---------------------------------------------------------------------------
# Wilson score interval
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BinomialSummary:
    successes: int
    trials: int
    rate: float
    ci_low: float
    ci_high: float
    confidence: float = 0.95


def wilson_interval(
    successes: int, trials: int, confidence: float = 0.95
) -> BinomialSummary:
    """Wilson score interval; stable at 0% and 100% observed rates."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if not (0 <= successes <= trials):
        raise ValueError("successes must lie in [0, trials]")
    z = float(sps.norm.ppf(0.5 + confidence / 2.0))
    n = float(trials)
    p = successes / n
    z2 = z * z
    denom = 1.0 + z2 / n
    center = (p + z2 / (2.0 * n)) / denom
    half = (z / denom) * math.sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n))
    return BinomialSummary(
        successes=successes,
        trials=trials,
        rate=p,
        ci_low=max(0.0, center - half),
        ci_high=min(1.0, center + half),
        confidence=confidence,
    )


# ---------------------------------------------------------------------------
# Gamma mean with profile-likelihood CI
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GammaMeanSummary:
    n: int
    mean: float
    ci_low: float
    ci_high: float
    confidence: float = 0.95
    shape: float = float("nan")


def _newton_1d(f, fprime, x0: float, lo: float, hi: float, tol: float = 1e-12) -> float:
    """Safeguarded Newton root of f on (lo, hi); falls back to bisection.

    Assumes f is monotone decreasing on the bracket (true for the concave
    log-likelihood derivatives used here).
    """
    x = min(max(x0, lo), hi)
    for _ in range(200):
        fx = f(x)
        if fx > 0:
            lo = x
        else:
            hi = x
        step = fx / fprime(x)
        x_new = x - step
        if not (lo < x_new < hi):
            x_new = 0.5 * (lo + hi)
        if abs(x_new - x) <= tol * max(1.0, abs(x)):
            return x_new
        x = x_new
    return x


def _gamma_loglik(k: float, rate: float, n: int, sum_x: float, sum_log: float) -> float:
    return n * (k * math.log(rate) - math.lgamma(k)) + (k - 1.0) * sum_log - rate * sum_x


def _gamma_mle_shape(s: float) -> float:
    """Solve log(k) - digamma(k) = s by safeguarded Newton."""
    k = (3.0 - s + math.sqrt((s - 3.0) ** 2 + 24.0 * s)) / (12.0 * s)
    lo, hi = 1e-12, 1e15
    while math.log(hi) - digamma(hi) > s:
        hi *= 2.0
        if hi > 1e300:
            break
    return _newton_1d(
        lambda kk: math.log(kk) - digamma(kk) - s,
        lambda kk: 1.0 / kk - trigamma(kk),
        k,
        lo,
        hi,
    )


def _gamma_profile_loglik(
    mu: float, n: int, sum_x: float, sum_log: float, k_start: float
) -> tuple[float, float]:
    """max_k loglik(k, rate=k/mu) and the maximizing k."""

    def dldk(k: float) -> float:
        return n * (math.log(k / mu) + 1.0 - digamma(k)) + sum_log - sum_x / mu

    def d2ldk2(k: float) -> float:
        return n * (1.0 / k - trigamma(k))

    lo, hi = 1e-12, max(2.0 * k_start, 1.0)
    while dldk(hi) > 0 and hi < 1e14:
        hi *= 2.0
    k = _newton_1d(dldk, d2ldk2, k_start, lo, hi)
    return _gamma_loglik(k, k / mu, n, sum_x, sum_log), k


def gamma_mean_profile_ci(samples, confidence: float = 0.95) -> GammaMeanSummary:
    """MLE gamma fit, reparametrized by its mean, with a profile CI."""
    x = np.asarray(samples, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise InferenceError("need at least 2 observations")
    if np.any(x <= 0) or not np.isfinite(x).all():
        raise InferenceError("samples must be positive and finite")
    if np.max(x) == np.min(x):
        raise InferenceError("all samples are equal; gamma fit is degenerate")
    n = int(x.size)
    sum_x = float(np.sum(x))
    sum_log = float(np.sum(np.log(x)))
    mean = sum_x / n
    s = math.log(mean) - sum_log / n  # > 0 by AM-GM for non-degenerate data
    k_hat = _gamma_mle_shape(s)
    loglik_hat = _gamma_loglik(k_hat, k_hat / mean, n, sum_x, sum_log)

    cutoff = _chi2_quantile_1df(confidence)

    def deviance(mu: float) -> float:
        lp, _ = _gamma_profile_loglik(mu, n, sum_x, sum_log, k_hat)
        return 2.0 * (loglik_hat - lp)

    lo = _profile_bound(deviance, mean, cutoff, side=-1, hard_lo=0.0, hard_hi=None)
    hi = _profile_bound(deviance, mean, cutoff, side=+1, hard_lo=0.0, hard_hi=None)
    return GammaMeanSummary(
        n=n, mean=mean, ci_low=lo, ci_high=hi, confidence=confidence, shape=k_hat
    )


def _profile_bound(
    deviance,
    center: float,
    cutoff: float,
    side: int,
    hard_lo: float | None,
    hard_hi: float | None,
    rel_tol: float = 1e-8,
) -> float:
    """One CI endpoint: bracket by doubling steps away from the MLE, then bisect."""
    inner = center
    step = 0.25 * max(abs(center), 1e-300)
    outer = None
    for _ in range(200):
        cand = center + side * step if side > 0 else center - step
        if hard_lo is not None and cand <= hard_lo:
            cand = 0.5 * (inner + hard_lo)
            if deviance(cand) <= cutoff:
                # Deviance never reaches the cutoff before the support edge.
                inner = cand
                if inner - hard_lo <= rel_tol * max(abs(center), 1.0):
                    return hard_lo
                continue
            outer = cand
            break
        if hard_hi is not None and cand >= hard_hi:
            cand = 0.5 * (inner + hard_hi)
            if deviance(cand) <= cutoff:
                inner = cand
                if hard_hi - inner <= rel_tol * max(abs(center), 1.0):
                    return hard_hi
                continue
            outer = cand
            break
        if deviance(cand) > cutoff:
            outer = cand
            break
        inner = cand
        step *= 2.0
    if outer is None:
        return inner
    for _ in range(200):
        mid = 0.5 * (inner + outer)
        if deviance(mid) > cutoff:
            outer = mid
        else:
            inner = mid
        if abs(outer - inner) <= rel_tol * max(abs(center), abs(inner)):
            break
    return inner


# ---------------------------------------------------------------------------
# Beta on [0, 0.5] mean with profile-likelihood CI
# ---------------------------------------------------------------------------

SPARSITY_SUPPORT = (0.0, 0.5)
_BOUNDARY_CLAMP = 1e-9
_PHI_MAX = 1e12


@dataclass(frozen=True)
class BetaMeanSummary:
    n: int
    mean: float
    ci_low: float
    ci_high: float
    confidence: float = 0.95
    concentration: float = float("nan")


def _beta_loglik(mu: float, phi: float, n: int, slog1: float, slog0: float) -> float:
    a = mu * phi
    b = (1.0 - mu) * phi
    return (
        (a - 1.0) * slog1
        + (b - 1.0) * slog0
        - n * (math.lgamma(a) + math.lgamma(b) - math.lgamma(phi))
    )


def _beta_profile_phi(
    mu: float, n: int, slog1: float, slog0: float, phi_start: float
) -> float:
    """max over concentration phi at fixed mean mu of the rescaled data."""

    def dldphi(phi: float) -> float:
        return (
            mu * slog1
            + (1.0 - mu) * slog0
            - n * (mu * digamma(mu * phi) + (1.0 - mu) * digamma((1.0 - mu) * phi) - digamma(phi))
        )

    def d2ldphi2(phi: float) -> float:
        return -n * (
            mu * mu * trigamma(mu * phi)
            + (1.0 - mu) * (1.0 - mu) * trigamma((1.0 - mu) * phi)
            - trigamma(phi)
        )

    lo, hi = 1e-8, max(2.0 * phi_start, 1.0)
    while dldphi(hi) > 0 and hi < _PHI_MAX:
        hi *= 2.0
    return _newton_1d(dldphi, d2ldphi2, phi_start, lo, hi)


def _beta_mle(n: int, slog1: float, slog0: float, mu0: float, phi0: float) -> tuple[float, float]:
    """Coordinate ascent on the (mean, concentration) parametrization."""
    mu, phi = mu0, phi0
    ll = _beta_loglik(mu, phi, n, slog1, slog0)
    for _ in range(500):
        phi = _beta_profile_phi(mu, n, slog1, slog0, phi)

        def dldmu(m: float) -> float:
            return phi * (slog1 - slog0) - n * phi * (
                digamma(m * phi) - digamma((1.0 - m) * phi)
            )

        def d2ldmu2(m: float) -> float:
            return -n * phi * phi * (trigamma(m * phi) + trigamma((1.0 - m) * phi))

        mu = _newton_1d(dldmu, d2ldmu2, mu, 1e-12, 1.0 - 1e-12)
        ll_new = _beta_loglik(mu, phi, n, slog1, slog0)
        if abs(ll_new - ll) <= 1e-12 * max(1.0, abs(ll_new)):
            break
        ll = ll_new
    return mu, phi


def beta_mean_profile_ci(samples, confidence: float = 0.95) -> BetaMeanSummary:
    """Beta fit on [0, 0.5]-supported data with a profile CI for the mean.

    Data are rescaled to [0, 1] (y = 2x), fit by maximum likelihood, and
    the interval is mapped back to the original scale, so it can never
    leave [0, 0.5]. Boundary samples are clamped inward by 1e-9 first.
    """
    x = np.asarray(samples, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise InferenceError("need at least 2 observations")
    lo_s, hi_s = SPARSITY_SUPPORT
    if np.any(x < lo_s) or np.any(x > hi_s) or not np.isfinite(x).all():
        raise InferenceError(f"samples must lie in [{lo_s}, {hi_s}]")
    x = np.clip(x, lo_s + _BOUNDARY_CLAMP, hi_s - _BOUNDARY_CLAMP)
    if np.max(x) == np.min(x):
        raise InferenceError("all samples are equal; beta fit is degenerate")
    y = x / hi_s
    n = int(y.size)
    slog1 = float(np.sum(np.log(y)))
    slog0 = float(np.sum(np.log1p(-y)))
    ybar = float(np.mean(y))
    yvar = float(np.var(y))
    phi0 = max(ybar * (1.0 - ybar) / max(yvar, 1e-12) - 1.0, 0.1)
    mu_hat, phi_hat = _beta_mle(n, slog1, slog0, ybar, phi0)
    loglik_hat = _beta_loglik(mu_hat, phi_hat, n, slog1, slog0)

    cutoff = _chi2_quantile_1df(confidence)

    def deviance(mu: float) -> float:
        phi = _beta_profile_phi(mu, n, slog1, slog0, phi_hat)
        return 2.0 * (loglik_hat - _beta_loglik(mu, phi, n, slog1, slog0))

    lo = _profile_bound(deviance, mu_hat, cutoff, side=-1, hard_lo=0.0, hard_hi=1.0)
    hi = _profile_bound(deviance, mu_hat, cutoff, side=+1, hard_lo=0.0, hard_hi=1.0)
    return BetaMeanSummary(
        n=n,
        mean=mu_hat * hi_s,
        ci_low=lo * hi_s,
        ci_high=hi * hi_s,
        confidence=confidence,
        concentration=phi_hat,
    )


# ---------------------------------------------------------------------------
# Trial aggregation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MeanSummary:
    """A mean with an optional asymmetric CI (absent for n < 2 or a
    degenerate fit)."""

    n: int
    mean: float
    ci_low: float | None
    ci_high: float | None

    @property
    def has_ci(self) -> bool:
        return self.ci_low is not None


@dataclass
class SummaryRow:
    """One aggregated cell: success rate plus solved-at / sparsity means.

    solved_at and sparsity cover successful trials only and are None when
    nothing succeeded.
    """

    n: int
    successes: int
    failures: int
    errored: int
    success_rate: BinomialSummary
    solved_at: MeanSummary | None
    sparsity: MeanSummary | None


def _mean_summary_gamma(values: list[float], confidence: float) -> MeanSummary:
    if len(values) == 1:
        return MeanSummary(n=1, mean=values[0], ci_low=None, ci_high=None)
    try:
        fit = gamma_mean_profile_ci(values, confidence)
        return MeanSummary(n=fit.n, mean=fit.mean, ci_low=fit.ci_low, ci_high=fit.ci_high)
    except InferenceError:
        return MeanSummary(
            n=len(values), mean=float(np.mean(values)), ci_low=None, ci_high=None
        )


def _mean_summary_beta(values: list[float], confidence: float) -> MeanSummary:
    if len(values) == 1:
        return MeanSummary(n=1, mean=values[0], ci_low=None, ci_high=None)
    try:
        fit = beta_mean_profile_ci(values, confidence)
        return MeanSummary(n=fit.n, mean=fit.mean, ci_low=fit.ci_low, ci_high=fit.ci_high)
    except InferenceError:
        return MeanSummary(
            n=len(values), mean=float(np.mean(values)), ci_low=None, ci_high=None
        )


def summarize(records, confidence: float = 0.95) -> SummaryRow:
    """Aggregate trial records that share a (model, task) cell.

    Success rate uses every record; solved-at and sparsity use the
    successful ones. Degenerate sample sets fall back to point estimates
    without intervals.
    """
    records = list(records)
    if not records:
        raise ValueError("no records to summarize")
    n = len(records)
    errored = sum(1 for r in records if getattr(r, "diverged", False))
    succ = [r for r in records if r.success]
    rate = wilson_interval(len(succ), n, confidence)
    solved = None
    sparsity = None
    if succ:
        solved_vals = [float(r.solved_at) for r in succ if r.solved_at is not None]
        if solved_vals:
            solved = _mean_summary_gamma(solved_vals, confidence)
        sparsity_vals = [
            float(r.sparsity_error_at_selected)
            for r in succ
            if r.sparsity_error_at_selected is not None
        ]
        if sparsity_vals:
            sparsity = _mean_summary_beta(sparsity_vals, confidence)
    return SummaryRow(
        n=n,
        successes=len(succ),
        failures=n - len(succ),
        errored=errored,
        success_rate=rate,
        solved_at=solved,
        sparsity=sparsity,
    )
