"""
Binomial probabilities and the exact identities built on them.

Matching probabilities P(S_m(p) = S'_m'(p') + n) are the integrands of the
covariance representation. They are evaluated on a window around both
modes whose omitted mass is bounded by a Bernstein tail certificate, and
summed with math.fsum so the result does not depend on summation order.
"""
import math
from typing import Callable, Sequence, Tuple

import numpy as np
import structlog
from scipy import stats

from whitlab.core.elements import (
    IDENTITY_TOLERANCE,
    MATCH_TAIL_TARGET,
    MATCH_WINDOW_PAD,
    MATCH_WINDOW_SIGMAS,
    BinomialSpec,
    IdentityCheck,
)

logger = structlog.get_logger(__name__)


def binom_pmf(spec: BinomialSpec, k: int) -> float:
    """
    P(S_m(p) = k).

    Point masses at p = 0 and p = 1 are exact; otherwise the density
    comes from scipy's binomial law, accurate to a few ulps for any m.

    Args:
        spec: Trial count and success probability
        k: Integer value

    Returns:
        Probability, 0 outside 0 <= k <= m
    """
    if k < 0 or k > spec.m:
        return 0.0
    if spec.p == 0.0:
        return 1.0 if k == 0 else 0.0
    if spec.p == 1.0:
        return 1.0 if k == spec.m else 0.0
    return float(stats.binom.pmf(k, spec.m, spec.p))


def binom_logpmf(spec: BinomialSpec, k: int) -> float:
    """log P(S_m(p) = k), -inf outside the support."""
    if k < 0 or k > spec.m:
        return -math.inf
    if spec.p in (0.0, 1.0):
        return 0.0 if binom_pmf(spec, k) == 1.0 else -math.inf
    return float(stats.binom.logpmf(k, spec.m, spec.p))


def binom_pmf_vector(spec: BinomialSpec, ks: np.ndarray) -> np.ndarray:
    """Vectorized binom_pmf on integer array ks."""
    ks = np.asarray(ks)
    if spec.p == 0.0:
        return (ks == 0).astype(float)
    if spec.p == 1.0:
        return (ks == spec.m).astype(float)
    return stats.binom.pmf(ks, spec.m, spec.p)


def window_half_width(spec: BinomialSpec) -> float:
    """
    Half width of the matching window around the mean of S_m(p).

    Starts from MATCH_WINDOW_SIGMAS standard deviations plus
    MATCH_WINDOW_PAD sites and widens until the tail certificate is at most
    MATCH_TAIL_TARGET.
    """
    sd = math.sqrt(spec.variance)
    h = MATCH_WINDOW_SIGMAS * sd + MATCH_WINDOW_PAD
    while tail_certificate(spec, h) > MATCH_TAIL_TARGET:
        h += max(sd, 1.0)
    return h


def tail_certificate(spec: BinomialSpec, half_width: float) -> float:
    """
    Bernstein bound on P(|S_m(p) - mp| >= half_width).

    2 exp(-d^2 / (2 (m p (1-p) + d/3))) for summands bounded by 1.
    """
    if half_width <= 0:
        return 1.0
    d = half_width
    bound = 2.0 * math.exp(-d * d / (2.0 * (spec.variance + d / 3.0)))
    return min(1.0, bound)


def _support_window(spec: BinomialSpec) -> Tuple[int, int]:
    h = window_half_width(spec)
    lo = max(0, math.ceil(spec.mean - h))
    hi = min(spec.m, math.floor(spec.mean + h))
    return lo, hi


def match_prob(s1: BinomialSpec, s2: BinomialSpec, shift: int = 0) -> float:
    """
    P(S_{m1}(p1) = S'_{m2}(p2) + shift) for independent sums.

    Sums pmf1(k + shift) * pmf2(k) over k in the intersection of both
    windows, in increasing k. Swapping s1 and s2 at shift 0 produces the
    same products in the same order, so the result is exactly symmetric.

    Args:
        s1: Law of S
        s2: Law of S'
        shift: Integer offset n

    Returns:
        Matching probability; omitted tail mass is below
        tail_certificate(s1) + tail_certificate(s2)
    """
    # point masses
    if s1.p in (0.0, 1.0):
        value = 0 if s1.p == 0.0 else s1.m
        return binom_pmf(s2, value - shift)
    if s2.p in (0.0, 1.0):
        value = 0 if s2.p == 0.0 else s2.m
        return binom_pmf(s1, value + shift)

    lo1, hi1 = _support_window(s1)
    lo2, hi2 = _support_window(s2)
    lo = max(lo2, lo1 - shift)
    hi = min(hi2, hi1 - shift)
    if lo > hi:
        return 0.0

    ks = np.arange(lo, hi + 1)
    terms = stats.binom.pmf(ks + shift, s1.m, s1.p) * stats.binom.pmf(ks, s2.m, s2.p)
    return math.fsum(terms.tolist())


def match_prob_full(s1: BinomialSpec, s2: BinomialSpec, shift: int = 0) -> float:
    """Matching probability summed over the whole support, no window."""
    ks = np.arange(0, s2.m + 1)
    terms = binom_pmf_vector(s1, ks + shift) * binom_pmf_vector(s2, ks)
    return math.fsum(terms.tolist())


def match_prob_matrix(
    ms: Sequence[int],
    p: float,
    ms_prime: Sequence[int],
    p_prime: float
) -> np.ndarray:
    """
    Matching probabilities P(S_{ms[i]}(p) = S'_{ms_prime[l]}(p')) at shift 0.

    All pmfs are tabulated on one common window and contracted with a single
    matrix product.

    Returns:
        Array of shape (len(ms), len(ms_prime))
    """
    ms = np.asarray(ms, dtype=np.int64)
    ms_prime = np.asarray(ms_prime, dtype=np.int64)
    if ms.size == 0 or ms_prime.size == 0:
        return np.zeros((ms.size, ms_prime.size))

    left_windows = [_support_window(BinomialSpec(int(m), p)) for m in np.unique(ms)]
    right_windows = [_support_window(BinomialSpec(int(m), p_prime)) for m in np.unique(ms_prime)]
    lo = max(min(w[0] for w in left_windows), min(w[0] for w in right_windows))
    hi = min(max(w[1] for w in left_windows), max(w[1] for w in right_windows))
    if lo > hi:
        return np.zeros((ms.size, ms_prime.size))

    ks = np.arange(lo, hi + 1)
    left = _pmf_table(ks, ms, p)
    right = _pmf_table(ks, ms_prime, p_prime)
    return left @ right.T


def _pmf_table(ks: np.ndarray, ms: np.ndarray, p: float) -> np.ndarray:
    if p == 0.0:
        return np.broadcast_to((ks == 0).astype(float), (ms.size, ks.size)).copy()
    if p == 1.0:
        return (ks[None, :] == ms[:, None]).astype(float)
    return stats.binom.pmf(ks[None, :], ms[:, None], p)


def complement_identity_check(
    s1: BinomialSpec,
    s2: BinomialSpec,
    shift: int,
    tolerance: float = 1e-14
) -> IdentityCheck:
    """
    P(S_m(p) = S'_m'(p') + n) = P(S_m(1-p) = S'_m'(1-p') + m - m' - n).

    Returns:
        IdentityCheck carrying both sides
    """
    lhs = match_prob(s1, s2, shift)
    rhs = match_prob(
        BinomialSpec(s1.m, 1.0 - s1.p),
        BinomialSpec(s2.m, 1.0 - s2.p),
        s1.m - s2.m - shift,
    )
    return IdentityCheck(name="complement", lhs=lhs, rhs=rhs, tolerance=tolerance)


def _expectation(pmf: np.ndarray, values: np.ndarray) -> float:
    return math.fsum((pmf * values).tolist())


def shift_identities_check(
    F: Callable[[int], float],
    m: int,
    p: float,
    tolerance: float = IDENTITY_TOLERANCE
) -> Tuple[IdentityCheck, ...]:
    """
    Shift recursions and binomial integration by parts.

    Checks
        p (E F(S_m) - E F(S_m + 1)) = E F(S_m) - E F(S_{m+1})
        E F(S_m + 2) = p^-2 E F(S_{m+2}) - 2(1-p) p^-2 E F(S_{m+1})
                       + (1-p)^2 p^-2 E F(S_m)
        E[S_m F(S_m)] = m p E F(S_{m-1} + 1)

    Tolerances scale with max|F| and, for the two-step expansion, with
    p^-2, the conditioning of the right-hand side.

    Args:
        F: Bounded function on 0..m+2
        m: Trial count
        p: Success probability in (0, 1]

    Returns:
        The three IdentityCheck records

    Raises:
        ValueError: If p is 0 (the two-step expansion divides by p^2)
    """
    if m < 0:
        raise ValueError(f"Trial count must be >= 0, got {m}")
    if not 0.0 < p <= 1.0:
        raise ValueError(f"Shift identities need 0 < p <= 1, got {p}")

    values = np.array([float(F(n)) for n in range(m + 3)])
    scale = max(1.0, float(np.abs(values).max()))

    def E(trials: int, offset: int = 0) -> float:
        ks = np.arange(trials + 1)
        pmf = binom_pmf_vector(BinomialSpec(trials, p), ks)
        return _expectation(pmf, values[ks + offset])

    e_m, e_m1, e_m2 = E(m), E(m + 1), E(m + 2)

    one_step = IdentityCheck(
        name="shift_one_step",
        lhs=p * (e_m - E(m, 1)),
        rhs=e_m - e_m1,
        tolerance=tolerance * scale,
    )

    q = 1.0 - p
    two_step = IdentityCheck(
        name="shift_two_step",
        lhs=E(m, 2),
        rhs=(e_m2 - 2.0 * q * e_m1 + q * q * e_m) / (p * p),
        tolerance=tolerance * scale / (p * p),
    )

    ks = np.arange(m + 1)
    pmf = binom_pmf_vector(BinomialSpec(m, p), ks)
    lhs_ibp = _expectation(pmf, ks * values[ks])
    rhs_ibp = m * p * E(m - 1, 1) if m > 0 else 0.0
    by_parts = IdentityCheck(
        name="integration_by_parts",
        lhs=lhs_ibp,
        rhs=rhs_ibp,
        tolerance=tolerance * scale * max(1.0, m * p),
    )
    return (one_step, two_step, by_parts)


def pmf_time_derivative(m: int, r: float, a: float, n: int) -> float:
    """
    d/da P(S_m(r/a) = n) = a^-1 [(n+1) P(S_m(r/a) = n+1) - n P(S_m(r/a) = n)].

    Args:
        m: Trial count
        r: Time, 0 < r < a
        a: Time scale
        n: Integer value

    Returns:
        Derivative in 1/time
    """
    if not 0.0 < r < a:
        raise ValueError(f"Need 0 < r < a, got r={r}, a={a}")
    spec = BinomialSpec(m, r / a)
    return ((n + 1) * binom_pmf(spec, n + 1) - n * binom_pmf(spec, n)) / a
