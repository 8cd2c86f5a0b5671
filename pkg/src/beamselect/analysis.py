"""Closed-form predictions for the selection process and residual interference.

Everything here is a pure function of scenario parameters.  The chain:

* A uniformly random node pair gives phase-difference cosines u = cos(delta)
  distributed arcsine on (-1, 1): mean 0, variance 1/2.
* One group's interference quadrature components X, Y at a victim BS are sums
  of L terms sqrt(P) * a_r * u_r, approximately zero-mean Gaussian with
  variance sigma_X^2 = gamma * sigma_w^2 * sigma_1^2, where sigma_1^2 =
  E{u^2} * E{a^2} = 0.5 * exp(2m + 2 sigma^2) carries the full second moment
  of the lognormal gain (its mean contributes, not just its spread; dropping
  the mean-squared term understates the variance by a factor e^sigma^2 - 1
  versus e^sigma^2, which Monte Carlo rules out decisively).
* The INR (X^2 + Y^2)/sigma_w^2 is then exponential; one BS accepts with
  p' = 1 - exp(-eta_thr sigma_w^2 / (2 sigma_X^2)), all D accept with
  p = (p')^D, and the trial count to approve T0 groups is negative binomial
  with mean T0 / p.
* Conditioned on approval, each component is truncated Gaussian with variance
  sigma_w^2 * sigma_I^2; a victim of K clusters sees Erlang-tailed INR with
  rate alpha = 1 / (2 sigma_I^2).
"""

from __future__ import annotations

import dataclasses
import math

from .core import Scenario

PHASE_DIFF_MEAN = 0.0        # E{cos(delta)} over uniform node pairs
PHASE_DIFF_VARIANCE = 0.5    # E{cos^2(delta)}
COMPONENT_MEAN = 0.0         # E{a cos(delta)}: gain and phase independent

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_PI = 0.5641895835477563


def phase_diff_pdf(u: float) -> float:
    """Arcsine density 1/(pi sqrt(1-u^2)) of the phase-difference cosine."""
    if not -1.0 < u < 1.0:
        raise ValueError("density defined on the open interval (-1, 1)")
    return 1.0 / (math.pi * math.sqrt(1.0 - u * u))


def unit_component_variance(scenario: Scenario) -> float:
    """sigma_1^2 = E{u^2} E{a^2} = 0.5 exp(2m + 2 sigma^2)."""
    return PHASE_DIFF_VARIANCE * math.exp(
        2.0 * scenario.lognormal_mean + 2.0 * scenario.lognormal_var)


def component_variance(scenario: Scenario) -> float:
    """Variance sigma_X^2 of either interference quadrature component."""
    return scenario.target_snr * scenario.noise_power * unit_component_variance(scenario)


def approval_probability(scenario: Scenario) -> tuple[float, float]:
    """(p', p): single-BS and all-D-BS acceptance probability of one trial."""
    sx2 = component_variance(scenario)
    if not sx2 > 0.0:
        raise ValueError("degenerate channel: zero component variance")
    rate = scenario.noise_power * scenario.inr_threshold / (2.0 * sx2)
    p_single = -math.expm1(-rate)
    p_all = p_single ** scenario.num_unintended
    return p_single, p_all


def expected_trials(scenario: Scenario) -> float:
    """Mean trial count ceil(N/L) / p to approve all groups."""
    _, p = approval_probability(scenario)
    if p <= 0.0:
        raise ValueError("zero approval probability: expected trials diverge")
    return scenario.num_groups / p


def trial_count_pmf(t: int, t0: int, p: float) -> float:
    """Negative binomial Pr{T = t}: t0-th approval on trial t. Log-space."""
    if not 0.0 < p <= 1.0:
        raise ValueError("approval probability must be in (0, 1]")
    if t0 < 1:
        raise ValueError("need at least one group")
    if t < t0:
        return 0.0
    if p == 1.0:
        return 1.0 if t == t0 else 0.0
    log_pmf = (math.lgamma(t) - math.lgamma(t0) - math.lgamma(t - t0 + 1)
               + t0 * math.log(p) + (t - t0) * math.log1p(-p))
    return math.exp(log_pmf)


def _beta(scenario: Scenario) -> float:
    return (scenario.noise_power * scenario.inr_threshold
            / (2.0 * component_variance(scenario)))


def truncated_variance(scenario: Scenario) -> float:
    """Normalized component variance sigma_I^2 after approval truncation.

    sigma_I^2 = sigma_X^2 (1 - (1+beta) e^{-beta}) / (sigma_w^2 (1 - e^{-beta})),
    beta = sigma_w^2 eta_thr / (2 sigma_X^2); always below the untruncated
    sigma_X^2 / sigma_w^2.
    """
    beta = _beta(scenario)
    if not beta > 0.0:
        raise ValueError("degenerate truncation: beta must be positive")
    eb = math.exp(-beta)
    denom = -math.expm1(-beta)
    num = denom - beta * eb
    return component_variance(scenario) * num / (scenario.noise_power * denom)


def truncated_component_pdf(u: float, scenario: Scenario) -> float:
    """Density of one quadrature component conditioned on trial approval.

    Support |u| <= sqrt(sigma_w^2 eta_thr); zero outside.  Its second moment
    is the truncated component variance sigma_w^2 * sigma_I^2.
    """
    sx2 = component_variance(scenario)
    sx = math.sqrt(sx2)
    cap = scenario.noise_power * scenario.inr_threshold
    uu = u * u
    if uu > cap:
        return 0.0
    norm = -math.expm1(-cap / (2.0 * sx2))
    body = 1.0 - 2.0 * q_function(math.sqrt(cap - uu) / sx)
    gauss = math.exp(-uu / (2.0 * sx2)) / (math.sqrt(2.0 * math.pi) * sx)
    return gauss * body / norm


def erlang_rate(scenario: Scenario) -> float:
    """alpha = 1 / (2 sigma_I^2), the INR tail rate of one approved cluster."""
    return 1.0 / (2.0 * truncated_variance(scenario))


def inr_ccdf(eta0: float, k: int, scenario: Scenario) -> float:
    """Pr{INR >= eta0} at a victim of k approved clusters (Erlang tail).

    Sum_{i<k} (alpha eta0)^i e^{-alpha eta0} / i!; log-space terms and
    compensated summation keep large-k and deep-tail values stable.
    """
    if k < 1:
        raise ValueError("need at least one cluster")
    if eta0 < 0.0:
        raise ValueError("INR level must be nonnegative")
    if eta0 == 0.0:
        return 1.0
    x = erlang_rate(scenario) * eta0
    log_x = math.log(x)
    terms = [math.exp(i * log_x - x - math.lgamma(i + 1)) for i in range(k)]
    return min(1.0, math.fsum(terms))


def q_function(x: float) -> float:
    """Gaussian tail integral Q(x) = Pr{Z > x}, Z standard normal."""
    try:
        return 0.5 * math.erfc(x / _SQRT2)
    except (AttributeError, OverflowError):
        return 0.5 * _erfc_rational(x / _SQRT2)


def _erfc_rational(x: float) -> float:
    """Rational-approximation erfc, relative accuracy better than 1e-12.

    Classic three-region scheme: small arguments through an erf rational in
    x^2, the mid range through exp(-x^2) times a degree-8 rational, the far
    tail through the asymptotic series correction in 1/x^2.
    """
    ax = abs(x)
    if ax <= 0.46875:
        z = x * x
        num = ((((1.85777706184603153e-1 * z + 3.16112374387056560e0) * z
                 + 1.13864154151050156e2) * z + 3.77485237685302021e2) * z
               + 3.20937758913846947e3)
        den = ((((z + 2.36012909523441209e1) * z + 2.44024637934444173e2) * z
                + 1.28261652607737228e3) * z + 2.84423683343917062e3)
        return 1.0 - x * num / den
    if ax <= 4.0:
        num = ((((((((2.15311535474403846e-8 * ax + 5.64188496988670089e-1) * ax
                     + 8.88314979438837594e0) * ax + 6.61191906371416295e1) * ax
                   + 2.98635138197400131e2) * ax + 8.81952221241769090e2) * ax
                 + 1.71204761263407058e3) * ax + 2.05107837782607147e3) * ax
               + 1.23033935479799725e3)
        den = ((((((((ax + 1.57449261107098347e1) * ax
                     + 1.17693950891312499e2) * ax + 5.37181101862009858e2) * ax
                   + 1.62138957456669019e3) * ax + 3.29079923573345963e3) * ax
                 + 4.36261909014324716e3) * ax + 3.43936767414372164e3) * ax
               + 1.23033935480374942e3)
        val = math.exp(-ax * ax) * num / den
    else:
        z = 1.0 / (ax * ax)
        num = ((((1.63153871373020978e-2 * z + 3.05326634961232344e-1) * z
                 + 3.60344899949804439e-1) * z + 1.25781726111229246e-1) * z
               + 1.60837851487422766e-2) * z + 6.58749161529837803e-4
        den = ((((z + 2.56852019228982242e0) * z + 1.87295284992346047e0) * z
                + 5.27905102951428412e-1) * z + 6.05183413124413191e-2) * z \
            + 2.33520497626869185e-3
        val = math.exp(-ax * ax) * (_INV_SQRT_PI - z * num / den) / ax
    return 2.0 - val if x < 0.0 else val


@dataclasses.dataclass(frozen=True)
class AnalyticalPrediction:
    """All closed-form quantities for one scenario (and cluster count)."""

    sigma_u_sq: float      # phase-difference cosine variance, 0.5
    sigma_1_sq: float      # per-unit-power component variance
    sigma_x_sq: float      # component variance at test power
    p_single: float        # one-BS acceptance probability
    p_all: float           # all-BS acceptance probability
    expected_trials: float
    beta: float            # normalized threshold
    sigma_i_sq: float      # truncated component variance (normalized)
    alpha: float           # Erlang rate of the approved-INR tail
    num_clusters: int

    def __post_init__(self):
        if not 0.0 <= self.p_single <= 1.0 or not 0.0 <= self.p_all <= 1.0:
            raise ValueError("probabilities out of range")
        if not self.sigma_i_sq * self.alpha > 0.0:
            raise ValueError("variance chain must be positive")


def predict(scenario: Scenario, num_clusters: int = 1) -> AnalyticalPrediction:
    """Evaluate the whole prediction chain once."""
    p_single, p_all = approval_probability(scenario)
    if p_all <= 0.0:
        raise ValueError("zero approval probability: expected trials diverge")
    si2 = truncated_variance(scenario)
    sx2 = component_variance(scenario)
    if not si2 < sx2 / scenario.noise_power:
        raise ValueError("truncation must shrink the component variance")
    return AnalyticalPrediction(
        sigma_u_sq=PHASE_DIFF_VARIANCE,
        sigma_1_sq=unit_component_variance(scenario),
        sigma_x_sq=sx2,
        p_single=p_single,
        p_all=p_all,
        expected_trials=scenario.num_groups / p_all,
        beta=_beta(scenario),
        sigma_i_sq=si2,
        alpha=1.0 / (2.0 * si2),
        num_clusters=int(num_clusters),
    )
