"""
Poisson and normal approximations of matching probabilities.

Skellam probabilities use the exponentially scaled Bessel function
scipy.special.ive, so arguments 2 sqrt(lam lam') of order 1e5 neither
overflow nor lose the normalisation. Every bound here is reported as a
number together with the scale it is expected to track; the constants
behind those scales are fitted, not certified.
"""
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np
import structlog
from scipy import special, stats

from whitlab.core.binomial import binom_pmf_vector, match_prob
from whitlab.core.elements import (
    HEAT_KERNEL_LIPSCHITZ_C,
    BinomialSpec,
    LcltParams,
    PoissonPair,
)

logger = structlog.get_logger(__name__)

# Skellam windows cover this many standard deviations of V - V'
SKELLAM_WINDOW_SIGMAS = 12.0


@dataclass(frozen=True)
class LcltApproximation:
    """Gaussian approximation of sqrt(N) P(S_M(q) = S'_M'(q') + a)."""
    approximation: float
    error_budget: float
    exact: float

    @property
    def error(self) -> float:
        return abs(self.exact - self.approximation)

    @property
    def scaled_error(self) -> float:
        """Error divided by the budget 1/(sqrt(N) sigma^2)."""
        return self.error / self.error_budget


@dataclass(frozen=True)
class LcltError:
    """Sup-distance of a local CLT over a window of shifts."""
    sup_error: float
    scaled: float
    argmax: int


@dataclass(frozen=True)
class LipschitzCheck:
    """Heat-kernel comparison bound and the observed difference."""
    bound: float
    difference: float
    holds: bool


def gaussian_density(sigma_sq: float, x: float) -> float:
    """
    g(sigma^2; x) = (2 pi sigma^2)^-1/2 exp(-x^2 / (2 sigma^2)).

    Raises:
        ValueError: If sigma_sq <= 0
    """
    if sigma_sq <= 0:
        raise ValueError(f"Variance must be positive, got {sigma_sq}")
    return math.exp(-x * x / (2.0 * sigma_sq)) / math.sqrt(2.0 * math.pi * sigma_sq)


def poisson_pmf(lam: float, k: int) -> float:
    """P(V(lam) = k) in log-gamma form."""
    if k < 0:
        return 0.0
    if lam == 0.0:
        return 1.0 if k == 0 else 0.0
    return math.exp(k * math.log(lam) - lam - math.lgamma(k + 1))


def skellam_match(pair: PoissonPair, k: int) -> float:
    """
    P(V(lam) = V'(lam') + k) through the scaled Bessel function.

    e^-(lam+lam') (lam/lam')^(k/2) I_k(2 sqrt(lam lam')) is evaluated as
    exp(-(sqrt(lam) - sqrt(lam'))^2 + (k/2) ln(lam/lam')) * ive(|k|, x).

    Args:
        pair: Poisson means, both positive
        k: Integer shift

    Returns:
        Probability
    """
    lam, lam_p = pair.lam, pair.lam_prime
    if lam <= 0 or lam_p <= 0:
        raise ValueError(f"Skellam means must be positive, got ({lam}, {lam_p})")
    x = 2.0 * math.sqrt(lam * lam_p)
    scaled = float(special.ive(abs(k), x))
    if scaled == 0.0:
        return 0.0
    log_prefactor = -(math.sqrt(lam) - math.sqrt(lam_p)) ** 2 + 0.5 * k * (math.log(lam) - math.log(lam_p))
    return math.exp(log_prefactor + math.log(scaled))


def skellam_series(pair: PoissonPair, k: int) -> float:
    """
    Double-sum oracle sum_j e^-(lam+lam') lam^(j+k) lam'^j / ((j+k)! j!).

    Terms are formed in log-gamma space and summed with fsum over a range of
    j wide enough that the neglected terms are below 1e-300 relative to the
    largest one.
    """
    lam, lam_p = pair.lam, pair.lam_prime
    if lam <= 0 or lam_p <= 0:
        raise ValueError(f"Skellam means must be positive, got ({lam}, {lam_p})")
    j0 = max(0, -k)
    # Terms peak near the mode of V' restricted to V = V' + k
    centre = 0.5 * (-k + math.sqrt(k * k + 4.0 * lam * lam_p))
    spread = 40.0 * math.sqrt(centre + 1.0) + 40.0
    j_lo = max(j0, int(centre - spread))
    j_hi = max(j_lo, int(centre + spread)) + 1
    js = np.arange(j_lo, j_hi + 1, dtype=float)
    logs = (
        -(lam + lam_p)
        + (js + k) * math.log(lam)
        + js * math.log(lam_p)
        - special.gammaln(js + k + 1)
        - special.gammaln(js + 1)
    )
    return math.fsum(np.exp(logs).tolist())


def skellam_window(pair: PoissonPair) -> Tuple[int, int]:
    """Shift window of SKELLAM_WINDOW_SIGMAS standard deviations around lam - lam'."""
    sd = math.sqrt(pair.total)
    centre = pair.lam - pair.lam_prime
    half = SKELLAM_WINDOW_SIGMAS * sd + 25.0
    return math.floor(centre - half), math.ceil(centre + half)


def stein_chen_bound(m: int, p: float) -> float:
    """
    Total-variation bound (1 - e^-mp) p for Binomial(m, p) against Poisson(mp).
    """
    if m < 1:
        raise ValueError(f"Stein-Chen bound needs m >= 1, got {m}")
    if not 0.0 < p < 1.0:
        raise ValueError(f"Stein-Chen bound needs 0 < p < 1, got {p}")
    return -math.expm1(-m * p) * p


def tv_binom_poisson(m: int, p: float) -> float:
    """
    d_TV(Binomial(m, p), Poisson(mp)).

    The sum over k <= m is exact; beyond m the binomial vanishes and the
    Poisson contribution is its survival function P(V > m), so no tail is
    truncated.
    """
    if m < 0:
        raise ValueError(f"Trial count must be >= 0, got {m}")
    if m == 0 or p == 0.0:
        return 0.0
    lam = m * p
    ks = np.arange(m + 1)
    binom = binom_pmf_vector(BinomialSpec(m, p), ks)
    poisson = stats.poisson.pmf(ks, lam)
    beyond = float(stats.poisson.sf(m, lam))
    return 0.5 * (math.fsum(np.abs(binom - poisson).tolist()) + beyond)


def poisson_lclt_error(pair: PoissonPair) -> LcltError:
    """
    sup_a |P(V = V' + a) - (lam+lam')^-1/2 g(1; (a - lam + lam') / sqrt(lam+lam'))|.

    Returns:
        LcltError with the sup, sup * (lam + lam') and the maximising shift
    """
    if pair.lam <= 0 or pair.lam_prime <= 0:
        raise ValueError("Poisson local CLT needs positive means")
    total = pair.total
    sd = math.sqrt(total)
    lo, hi = skellam_window(pair)
    worst, argmax = 0.0, lo
    for a in range(lo, hi + 1):
        exact = skellam_match(pair, a)
        approx = gaussian_density(1.0, (a - pair.lam + pair.lam_prime) / sd) / sd
        diff = abs(exact - approx)
        if diff > worst:
            worst, argmax = diff, a
    logger.debug("Poisson local CLT evaluated", lam=pair.lam, lam_prime=pair.lam_prime, sup=worst)
    return LcltError(sup_error=worst, scaled=worst * total, argmax=argmax)


def binom_lclt_approx(params: LcltParams, a: int) -> LcltApproximation:
    """
    Gaussian approximation g(sigma^2; a/sqrt(N) - mu) of
    sqrt(N) P(S_M(q) = S'_M'(q') + a), with budget 1/(sqrt(N) sigma^2).

    Raises:
        ValueError: If sigma^2 = 0
    """
    sigma_sq = params.sigma_sq
    if sigma_sq <= 0:
        raise ValueError("Binomial local CLT needs sigma^2 > 0")
    root_n = math.sqrt(params.N)
    approximation = gaussian_density(sigma_sq, a / root_n - params.mu)
    exact = root_n * match_prob(
        BinomialSpec(params.M, params.q),
        BinomialSpec(params.M_prime, params.q_prime),
        a,
    )
    return LcltApproximation(
        approximation=approximation,
        error_budget=1.0 / (root_n * sigma_sq),
        exact=exact,
    )


def binom_lclt_sup_error(params: LcltParams, half_window: int) -> LcltError:
    """sup over |a - sqrt(N) mu| <= half_window of the local CLT error, scaled by the budget."""
    centre = round(math.sqrt(params.N) * params.mu)
    worst, argmax, budget = 0.0, centre, 1.0
    for a in range(centre - half_window, centre + half_window + 1):
        result = binom_lclt_approx(params, a)
        budget = result.error_budget
        if result.error > worst:
            worst, argmax = result.error, a
    return LcltError(sup_error=worst, scaled=worst / budget, argmax=argmax)


def heat_kernel_lipschitz(a: float, b: float, x: float, y: float) -> LipschitzCheck:
    """
    |b - a| / a^(3/2) + |x - y| / b and whether
    |g(a; x) - g(b; y)| <= C times it, C = HEAT_KERNEL_LIPSCHITZ_C.

    Args:
        a: Smaller variance, positive
        b: Larger variance
        x: First argument
        y: Second argument
    """
    if not 0.0 < a <= b:
        raise ValueError(f"Need 0 < a <= b, got a={a}, b={b}")
    bound = abs(b - a) / a ** 1.5 + abs(x - y) / b
    difference = abs(gaussian_density(a, x) - gaussian_density(b, y))
    return LipschitzCheck(
        bound=bound,
        difference=difference,
        holds=difference <= HEAT_KERNEL_LIPSCHITZ_C * bound,
    )
