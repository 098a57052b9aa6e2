"""
Limit kernels of the rescaled covariances.

The limit is the time-inverted stationary solution of the two-dimensional
additive stochastic heat equation. Its covariance is assembled from the
heat semigroup Q_t and the log kernel; the log kernel is never integrated
in four dimensions but reduced, through the glue identity, to
one-dimensional integrals of Q_{2r+v}.

Test functions are finite Gaussian mixtures, which the heat flow maps to
Gaussian mixtures.
"""
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np
import structlog
from scipy import special

from whitlab.core.elements import (
    GaussianMixture,
    HeatKernelQuery,
    MixtureTerm,
    QuadResult,
    QuadratureConfig,
)
from whitlab.utils.quadrature import combine, geometric_points, integrate

logger = structlog.get_logger(__name__)

FOUR_PI = 4.0 * math.pi
TWO_PI = 2.0 * math.pi

# |psi mass - 1| accepted by recenter
PSI_MASS_TOLERANCE = 1e-12
# Masses below this count as zero, so recenter is idempotent
ZERO_MASS_TOLERANCE = 1e-14


@dataclass(frozen=True)
class GlueReport:
    """Both sides of the glue identity and its error functions."""
    lhs: float
    rhs: float
    eps1: float
    eps2: float
    eps3: float
    quadrature_error: float

    @property
    def residual(self) -> float:
        return abs(self.lhs - self.rhs)


# Heat semigroup

def heat_kernel(t: float, dist_sq: float) -> float:
    """Q_t at squared distance dist_sq; the t -> 0 limit is used at t = 0."""
    if t <= 0.0:
        return 0.0
    return math.exp(-dist_sq / (2.0 * t)) / (TWO_PI * t)


def heat_semigroup(q: HeatKernelQuery) -> float:
    """Q_t(x, y) = (2 pi t)^-1 exp(-|x - y|^2 / (2t))."""
    return heat_kernel(q.time, _dist_sq(q.x, q.y))


def _dist_sq(x: Sequence[float], y: Sequence[float]) -> float:
    return (x[0] - y[0]) ** 2 + (x[1] - y[1]) ** 2


# kappa_0

def _kappa_integrand(v: float) -> float:
    """(e^{-1/(4v)} - 1_{v >= 1}) / (4 pi v)."""
    if v <= 0.0:
        return 0.0
    if v < 1.0:
        return math.exp(-0.25 / v) / (FOUR_PI * v)
    return math.expm1(-0.25 / v) / (FOUR_PI * v)


def _kappa_tail(lower: float, quad: QuadratureConfig, label: str) -> QuadResult:
    """
    integral of _kappa_integrand over [lower, inf).

    The integrand is integrated in ln v up to V; beyond V it equals
    -1/(16 pi v^2) up to 1/(128 pi v^3), so the tail is added in closed
    form and its error bound folded into the result.
    """
    parts = []
    if lower < 1.0:
        parts.append(integrate(
            _kappa_integrand, lower, 1.0, quad,
            points=geometric_points(max(lower, 1e-3), 1.0),
            label=f"{label}:head",
        ))
        lower = 1.0
    V = max(1e3, 1.0 / math.sqrt(quad.epsabs))
    V = max(V, lower)
    parts.append(integrate(_kappa_integrand, lower, V, quad, transform="log", label=f"{label}:body"))
    tail = QuadResult(
        label=f"{label}:tail",
        value=-1.0 / (16.0 * math.pi * V),
        abserr=1.0 / (256.0 * math.pi * V * V),
    )
    return combine(label, *parts, tail)


def kappa0_integral(quad: QuadratureConfig) -> QuadResult:
    """
    kappa_0 = integral_0^inf (e^{-1/(4v)} - 1_{v >= 1}) / (4 pi v) dv.

    Split at v = 1 with a closed-form certified tail.
    """
    return _kappa_tail(0.0, quad, "kappa0")


@lru_cache(maxsize=16)
def kappa0_constant(quad: QuadratureConfig = QuadratureConfig()) -> float:
    """kappa_0 by quadrature."""
    result = kappa0_integral(quad)
    logger.info("kappa_0 computed", value=result.value, abserr=result.abserr)
    return result.value


def kappa0_closed_form() -> float:
    """(2 ln 2 - Euler gamma) / (4 pi), the exponential-integral evaluation of kappa_0."""
    return (2.0 * math.log(2.0) - np.euler_gamma) / FOUR_PI


# Glue identity

def glue_identity_check(
    y1: Sequence[float],
    y2: Sequence[float],
    T: float,
    quad: QuadratureConfig = QuadratureConfig()
) -> GlueReport:
    """
    integral_0^T Q_{2r}(y1, y2) dr against
    kappa_0 - ln|y1 - y2| / (2 pi) + ln T / (4 pi) + eps1 + eps2 + eps3.

    Args:
        y1: First point
        y2: Second point, distinct from y1
        T: Positive horizon
        quad: Quadrature tolerances

    Raises:
        ValueError: If y1 == y2 or T <= 0
    """
    d_sq = _dist_sq(y1, y2)
    if d_sq == 0.0:
        raise ValueError("Glue identity needs y1 != y2")
    if T <= 0:
        raise ValueError(f"Horizon must be positive, got {T}")

    lhs = integrate(
        lambda r: heat_kernel(2.0 * r, d_sq), 0.0, T, quad,
        points=geometric_points(d_sq / 64.0, T),
        label="glue:lhs",
    )

    ratio = T / d_sq
    eps1 = _kappa_tail(ratio, quad, "glue:eps1")
    indicator = 1.0 if 0.0 < ratio < 1.0 else 0.0
    eps2 = -indicator * math.log(T) / FOUR_PI
    eps3 = indicator * 0.5 * math.log(d_sq) / TWO_PI

    kappa = kappa0_integral(quad)
    rhs = kappa.value - 0.5 * math.log(d_sq) / TWO_PI + math.log(T) / FOUR_PI - eps1.value + eps2 + eps3
    return GlueReport(
        lhs=lhs.value,
        rhs=rhs,
        eps1=-eps1.value,
        eps2=eps2,
        eps3=eps3,
        quadrature_error=lhs.abserr + eps1.abserr + kappa.abserr,
    )


# Log kernel reductions

def smoothed_log_kernel(d: float, v: float, quad: QuadratureConfig = QuadratureConfig()) -> QuadResult:
    """
    (1/2 pi) E[-ln|d + B_v|] for a planar Brownian increment B_v.

    Computed as lim_T [integral_0^T Q_{2r+v}(d) dr - ln T/(4 pi) - kappa_0]
    at finite T: the remainder beyond T is -(2v + d^2)/(16 pi T) to
    leading order and is added in closed form.

    Args:
        d: Distance |x - y| >= 0
        v: Variance per coordinate, v > 0 unless d > 0
    """
    d_sq = d * d
    if v < 0 or (v == 0 and d_sq == 0):
        raise ValueError(f"Smoothed log kernel needs v > 0 or d > 0, got v={v}, d={d}")

    def near(r: float) -> float:
        return heat_kernel(2.0 * r + v, d_sq)

    def far(r: float) -> float:
        return heat_kernel(2.0 * r + v, d_sq) - 1.0 / (FOUR_PI * r)

    spread = 2.0 * v + d_sq
    T = max(1e3, (spread + 1.0) / math.sqrt(quad.epsabs))
    head = integrate(
        near, 0.0, 1.0, quad,
        points=geometric_points(max(d_sq / 64.0, 1e-6), 1.0) if v < d_sq else None,
        label="log_kernel:head",
    )
    body = integrate(far, 1.0, T, quad, transform="log", label="log_kernel:body")
    tail = QuadResult(
        label="log_kernel:tail",
        value=-spread / (16.0 * math.pi * T),
        abserr=(spread + 1.0) ** 2 / (FOUR_PI * T * T),
    )
    kappa = kappa0_integral(quad)
    negative_kappa = QuadResult(label="log_kernel:kappa0", value=-kappa.value, abserr=kappa.abserr)
    return combine("log_kernel", head, body, tail, negative_kappa)


def smoothed_log_kernel_exact(d: float, v: float) -> float:
    """
    Closed form -(1/2 pi) ln d - E1(d^2/(2v)) / (4 pi) of smoothed_log_kernel.

    At d = 0 this is (Euler gamma - ln(2v)) / (4 pi); at v = 0 it is
    -(1/2 pi) ln d.
    """
    if d == 0.0:
        if v <= 0:
            raise ValueError("Closed form needs v > 0 at d = 0")
        return (np.euler_gamma - math.log(2.0 * v)) / FOUR_PI
    if v == 0.0:
        return -math.log(d) / TWO_PI
    return -math.log(d) / TWO_PI - float(special.exp1(d * d / (2.0 * v))) / FOUR_PI


def _noise_term(d_sq: float, low: float, high: float, quad: QuadratureConfig) -> QuadResult:
    """(1/2) integral_low^high Q_u(d) du, the fresh-noise part of the covariance."""
    if high <= low:
        return QuadResult(label="noise", value=0.0, abserr=0.0)
    hints = geometric_points(max(low, d_sq / 64.0, 1e-9), high)
    half = integrate(lambda u: 0.5 * heat_kernel(u, d_sq) if u > 0 else 0.0,
                     low, high, quad, points=hints, label="noise")
    return half


def limit_covariance_result(
    x: Sequence[float],
    s: float,
    y: Sequence[float],
    t: float,
    quad: QuadratureConfig = QuadratureConfig()
) -> QuadResult:
    """
    Limit covariance with its quadrature audit.

    With c = 1/s + 1/t the value is
        lim_T [integral_0^T Q_{2r+c}(x,y) dr - ln T/(4 pi) - kappa_0]
        + integral_0^{1/t} Q_{c-2r}(x,y) dr.
    """
    if not 0.0 < s <= t:
        raise ValueError(f"Need 0 < s <= t, got s={s}, t={t}")
    d_sq = _dist_sq(x, y)
    if s == t and d_sq == 0.0:
        raise ValueError("No limit exists at s = t and x = y (need s < t or x != y)")

    c = 1.0 / s + 1.0 / t
    lag = 1.0 / s - 1.0 / t
    first = smoothed_log_kernel(math.sqrt(d_sq), c, quad)
    # integral_0^{1/t} Q_{c-2r} dr = (1/2) integral_{lag}^{c} Q_u du
    second = _noise_term(d_sq, lag, c, quad)
    return combine("limit_covariance", first, second)


def limit_covariance_point(
    x: Sequence[float],
    s: float,
    y: Sequence[float],
    t: float,
    quad: QuadratureConfig = QuadratureConfig()
) -> float:
    """
    Limit of the recentered covariance Cov[zeta^N(x,s); zeta^N(y,t)] - c_N.

    Args:
        x: Space point of the earlier time
        s: Earlier time, 0 < s <= t
        y: Space point of the later time
        t: Later time
        quad: Quadrature tolerances

    Raises:
        ValueError: If s = t and x = y
    """
    return limit_covariance_result(x, s, y, t, quad).value


def stationary_kernel(
    x: Sequence[float],
    y: Sequence[float],
    quad: QuadratureConfig = QuadratureConfig()
) -> float:
    """kappa_0 - ln|x - y| / (2 pi), the equal-time stationary covariance kernel."""
    d_sq = _dist_sq(x, y)
    if d_sq == 0.0:
        raise ValueError("Stationary kernel is singular at x = y")
    return kappa0_constant(quad) - 0.5 * math.log(d_sq) / TWO_PI


def stationary_kernel_quadrature(
    x: Sequence[float],
    y: Sequence[float],
    quad: QuadratureConfig = QuadratureConfig()
) -> QuadResult:
    """Direct integral_0^inf (Q_{2r}(x,y) - 1_{r >= 1}/(4 pi r)) dr."""
    d_sq = _dist_sq(x, y)
    if d_sq == 0.0:
        raise ValueError("Stationary kernel is singular at x = y")
    head = integrate(
        lambda r: heat_kernel(2.0 * r, d_sq) if r > 0 else 0.0, 0.0, 1.0, quad,
        points=geometric_points(d_sq / 64.0, 1.0),
        label="stationary:head",
    )
    T = max(1e3, (d_sq + 1.0) / math.sqrt(quad.epsabs))
    body = integrate(
        lambda r: heat_kernel(2.0 * r, d_sq) - 1.0 / (FOUR_PI * r),
        1.0, T, quad,
        points=[d_sq] if 1.0 < d_sq < T else None,
        transform="log",
        label="stationary:body",
    )
    tail = QuadResult(
        label="stationary:tail",
        value=-d_sq / (16.0 * math.pi * T),
        abserr=(d_sq + 1.0) ** 2 / (FOUR_PI * T * T),
    )
    return combine("stationary_kernel", head, body, tail)


# Gaussian mixtures

def bump(weight: float, center: Tuple[float, float], width: float) -> GaussianMixture:
    """Single bump weight * g(width; |x - center|)."""
    return GaussianMixture((MixtureTerm(weight, (float(center[0]), float(center[1])), width),))


def default_psi() -> GaussianMixture:
    """Unit-mass bump of width 1 at the origin."""
    return bump(1.0, (0.0, 0.0), 1.0)


def bump_difference(
    center1: Tuple[float, float],
    center2: Tuple[float, float],
    width: float = 1.0
) -> GaussianMixture:
    """Mass-zero test function g(.-center1) - g(.-center2)."""
    return combined(bump(1.0, center1, width), bump(-1.0, center2, width))


def total_mass(phi: GaussianMixture) -> float:
    return phi.total_mass


def _simplified(terms: Iterable[MixtureTerm]) -> GaussianMixture:
    """Merge terms with equal center and width; drop exact zeros."""
    merged: Dict[Tuple[Tuple[float, float], float], float] = {}
    for term in terms:
        key = (term.center, term.width)
        merged[key] = merged.get(key, 0.0) + term.weight
    return GaussianMixture(tuple(
        MixtureTerm(weight, center, width)
        for (center, width), weight in merged.items()
        if weight != 0.0
    ))


def scaled(phi: GaussianMixture, factor: float) -> GaussianMixture:
    return _simplified(MixtureTerm(factor * t.weight, t.center, t.width) for t in phi.terms)


def combined(*mixtures: GaussianMixture) -> GaussianMixture:
    """Sum of mixtures."""
    return _simplified(t for phi in mixtures for t in phi.terms)


def heat_flow(phi: GaussianMixture, u: float) -> GaussianMixture:
    """Q_u phi: every bump of width w becomes a bump of width w + u."""
    if u < 0:
        raise ValueError(f"Heat flow time must be >= 0, got {u}")
    return GaussianMixture(tuple(MixtureTerm(t.weight, t.center, t.width + u) for t in phi.terms))


def evaluate(phi: GaussianMixture, x: Sequence[float]) -> float:
    """phi(x)."""
    return math.fsum(
        t.weight * math.exp(-_dist_sq(x, t.center) / (2.0 * t.width)) / (TWO_PI * t.width)
        for t in phi.terms
    )


def recenter(phi: GaussianMixture, psi: GaussianMixture) -> GaussianMixture:
    """
    Re-centering R phi = phi - (integral phi) psi.

    Mixtures already of mass zero are returned unchanged.

    Raises:
        ValueError: If psi does not have unit mass
    """
    if abs(psi.total_mass - 1.0) > PSI_MASS_TOLERANCE:
        raise ValueError(f"Re-centering function must have mass 1, got {psi.total_mass}")
    mass = phi.total_mass
    if abs(mass) <= ZERO_MASS_TOLERANCE:
        return phi
    return combined(phi, scaled(psi, -mass))


def _pair_terms(
    phi1: GaussianMixture,
    phi2: GaussianMixture
) -> List[Tuple[float, float, float]]:
    """(weight product, distance, summed width) for every pair of bumps."""
    return [
        (a.weight * b.weight, math.sqrt(_dist_sq(a.center, b.center)), a.width + b.width)
        for a in phi1.terms
        for b in phi2.terms
    ]


def weak_limit_covariance(
    phi1: GaussianMixture,
    phi2: GaussianMixture,
    s: float,
    t: float,
    quad: QuadratureConfig = QuadratureConfig()
) -> float:
    """
    Limit of Cov[zeta^N_s(phi1); zeta^N_t(phi2)] - c_N (int phi1)(int phi2).

    (1/2 pi) <Q_{1/s} phi1, -ln|.| Q_{1/t} phi2>
        + integral_0^{1/t} <Q_{1/s - r} phi1, Q_{1/t - r} phi2> dr,
    reduced pairwise: for bumps of widths w_a, w_b at distance d the two
    terms are smoothed_log_kernel(d, W + c) and the noise term over
    [W + 1/s - 1/t, W + c], W = w_a + w_b.
    """
    if not 0.0 < s <= t:
        raise ValueError(f"Need 0 < s <= t, got s={s}, t={t}")
    c = 1.0 / s + 1.0 / t
    lag = 1.0 / s - 1.0 / t

    cache: Dict[Tuple[float, float], float] = {}
    parts = []
    for weight, d, width in _pair_terms(phi1, phi2):
        key = (d, width)
        if key not in cache:
            log_part = smoothed_log_kernel(d, width + c, quad)
            noise_part = _noise_term(d * d, width + lag, width + c, quad)
            cache[key] = log_part.value + noise_part.value
        parts.append(weight * cache[key])
    value = math.fsum(parts)
    logger.debug("Weak limit covariance", s=s, t=t, pairs=len(parts), value=value)
    return value


def stationary_weak_covariance(
    phi1: GaussianMixture,
    phi2: GaussianMixture,
    lag: float,
    quad: QuadratureConfig = QuadratureConfig()
) -> float:
    """
    Covariance of the stationary solution at time lag in the limit clock:
    sum over bump pairs of integral_0^inf (Q_{W + lag + 2r}(d) - 1_{r >= 1}/(4 pi r)) dr.

    For mass-zero mixtures this equals weak_limit_covariance(phi1, phi2, s, t)
    with lag = 1/s - 1/t.
    """
    if lag < 0:
        raise ValueError(f"Lag must be >= 0, got {lag}")
    kappa = kappa0_constant(quad)
    parts = [
        weight * (smoothed_log_kernel(d, width + lag, quad).value + kappa)
        for weight, d, width in _pair_terms(phi1, phi2)
    ]
    return math.fsum(parts)
