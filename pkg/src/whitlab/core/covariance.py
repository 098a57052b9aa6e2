"""
Covariance engine of the Whittaker Gaussian process.

The covariance at death pairs m, m' and times s <= t is

    integral_0^s prod_j P(S_{m_j}(r/s) = S'_{m'_j}(r/t)) dr.

Under the Edwards-Wilkinson rescaling the same integral is split into a
left interval and a right interval, both integrated in the raw time
variable where Poisson approximations hold, and a middle interval
integrated in macroscopic time where the local CLT holds. The interval
ends are the quadrature split points.
"""
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, List, Optional, Sequence, Tuple

import structlog

from whitlab.core.approx import skellam_match
from whitlab.core.binomial import match_prob
from whitlab.core.checks import CheckResult
from whitlab.core.elements import (
    DEFAULT_T0,
    DEFAULT_T1,
    BinomialSpec,
    CovarianceReport,
    DeathPair,
    IdentityCheck,
    ModulusRow,
    PoissonPair,
    QuadResult,
    QuadratureConfig,
    ScalingScheme,
    SpaceTimePoint,
)
from whitlab.utils.quadrature import combine, geometric_points, integrate
from whitlab.utils.sweep import run_sweep

logger = structlog.get_logger(__name__)

FOUR_PI = 4.0 * math.pi

# Floor values within this many ulps of an integer snap to it
FLOOR_SNAP_ULPS = 64


@dataclass(frozen=True)
class Profiles:
    """Means and variances of N^-1/2 (S_{M_j}(r/s) - S'_{M'_j}(r/t)) and their limits."""
    mu_N: Tuple[float, float]
    sigma_N_sq: Tuple[float, float]
    mu: Tuple[float, float]
    sigma_sq: Tuple[float, float]


# Lattice indices

def lattice_index(u: float, r: float, N: int) -> int:
    """
    M(u, r) = floor(N r + N r u / sqrt(N)).

    Raises:
        ValueError: If u < -sqrt(N) or r <= 0
    """
    if r <= 0:
        raise ValueError(f"Time must be positive, got {r}")
    root = math.sqrt(N)
    if u < -root:
        raise ValueError(f"Space coordinate {u} is below -sqrt(N) = {-root}")
    value = N * r + N * r * u / root
    nearest = round(value)
    if abs(value - nearest) <= FLOOR_SNAP_ULPS * math.ulp(max(1.0, abs(value))):
        return max(0, int(nearest))
    return max(0, math.floor(value))


def death_pair_at(x: Sequence[float], r: float, N: int) -> DeathPair:
    """(M(x_1, r), M(x_2, r))."""
    return DeathPair(lattice_index(x[0], r, N), lattice_index(x[1], r, N))


def lattice_shift_check(x: float, a: float, ell: int, N: int) -> IdentityCheck:
    """M(x, a) + ell = M(x + ell / (a sqrt(N)), a), exact in integers."""
    lhs = lattice_index(x, a, N) + ell
    rhs = lattice_index(x + ell / (a * math.sqrt(N)), a, N)
    return IdentityCheck(name="lattice_shift", lhs=float(lhs), rhs=float(rhs), tolerance=0.0)


def profiles(
    x: Sequence[float],
    y: Sequence[float],
    s: float,
    t: float,
    r: float,
    N: int
) -> Profiles:
    """
    Finite-N and limiting mean/variance profiles at time r in (0, s].

    mu_j(r) = (x_j - y_j) r and sigma_j(r)^2 = r (2 - r/s - r/t).
    """
    if not 0.0 < r <= s <= t:
        raise ValueError(f"Need 0 < r <= s <= t, got r={r}, s={s}, t={t}")
    M = death_pair_at(x, s, N).as_tuple()
    Mp = death_pair_at(y, t, N).as_tuple()
    p, q = r / s, r / t
    root = math.sqrt(N)
    mu_N = tuple((M[j] * p - Mp[j] * q) / root for j in range(2))
    sigma_N_sq = tuple(M[j] / N * p * (1.0 - p) + Mp[j] / N * q * (1.0 - q) for j in range(2))
    mu = tuple((x[j] - y[j]) * r for j in range(2))
    sigma_sq = tuple(max(0.0, r * (2.0 - p - q)) for _ in range(2))
    return Profiles(mu_N=mu_N, sigma_N_sq=sigma_N_sq, mu=mu, sigma_sq=sigma_sq)


# Exact covariance

def _match_product(
    m: Tuple[int, int],
    m_prime: Tuple[int, int],
    u: float,
    v: float
) -> Callable[[float], float]:
    """r -> prod_j P(S_{m_j}(r/u) = S'_{m'_j}(r/v))."""
    def f(r: float) -> float:
        p = min(1.0, max(0.0, r / u))
        q = min(1.0, max(0.0, r / v))
        value = 1.0
        for j in range(2):
            value *= match_prob(BinomialSpec(m[j], p), BinomialSpec(m_prime[j], q))
            if value == 0.0:
                break
        return value
    return f


def _two_sided_points(lower: float, upper: float, scale: float) -> List[float]:
    """Geometric split hints growing away from both ends of [lower, upper]."""
    half = 0.5 * (upper - lower)
    steps = geometric_points(scale, half)
    return [lower + h for h in steps] + [lower + half] + [upper - h for h in steps]


def covariance_exact_result(
    m: DeathPair,
    m_prime: DeathPair,
    s: float,
    t: float,
    quad: QuadratureConfig = QuadratureConfig()
) -> QuadResult:
    """covariance_exact with its quadrature audit."""
    if not 0.0 < s <= t:
        raise ValueError(f"Need 0 < s <= t, got s={s}, t={t}")
    scale = s / (4.0 * max(1, m.sup_norm, m_prime.sup_norm))
    return integrate(
        _match_product(m.as_tuple(), m_prime.as_tuple(), s, t),
        0.0, s, quad,
        points=_two_sided_points(0.0, s, scale),
        label="covariance_exact",
    )


def covariance_exact(
    m: DeathPair,
    m_prime: DeathPair,
    s: float,
    t: float,
    quad: QuadratureConfig = QuadratureConfig()
) -> float:
    """
    Cov[zeta_s Sigma(m); zeta_t Sigma(m')] from the matching-probability representation.

    Args:
        m: Death pair of the earlier time
        m_prime: Death pair of the later time
        s: Earlier time
        t: Later time, s <= t
        quad: Quadrature tolerances

    Raises:
        QuadratureError: If the integral does not converge
    """
    return covariance_exact_result(m, m_prime, s, t, quad).value


# Rescaled covariance

def _rescaled_kernels(
    p1: SpaceTimePoint,
    p2: SpaceTimePoint,
    scheme: ScalingScheme
) -> Tuple[Callable[[float], float], Callable[[float], float]]:
    """Raw-time kernel b^N(rho) on [0, Ns] and macroscopic kernel b_N(r) on [0, s]."""
    N = scheme.N
    s, t = p1.t, p2.t
    M = death_pair_at(p1.x, s, N).as_tuple()
    Mp = death_pair_at(p2.x, t, N).as_tuple()
    raw = _match_product(M, Mp, N * s, N * t)
    unit = _match_product(M, Mp, s, t)

    def macro(r: float) -> float:
        return N * unit(r)

    return raw, macro


def covariance_rescaled(
    p1: SpaceTimePoint,
    p2: SpaceTimePoint,
    scheme: ScalingScheme,
    quad: QuadratureConfig = QuadratureConfig()
) -> CovarianceReport:
    """
    Cov[zeta^N(x, s); zeta^N(y, t)] split at N s ell_N and N s r_N.

    Three intervals are used when t - s <= tau_N, two otherwise. The
    recentered value subtracts c_N.

    Args:
        p1: (x, s)
        p2: (y, t) with s <= t
        scheme: Rescaling level N and exponent eta
        quad: Quadrature tolerances

    Returns:
        CovarianceReport; no_limit is set when s = t and x = y
    """
    s, t = p1.t, p2.t
    if s > t:
        raise ValueError(f"Need s <= t, got s={s}, t={t}")
    N = scheme.N
    ell = scheme.ell_N
    raw, macro = _rescaled_kernels(p1, p2, scheme)

    left = integrate(
        raw, 0.0, N * s * ell, quad,
        points=geometric_points(1.0, N * s * ell),
        label="rescaled:left",
    )
    if t - s <= scheme.tau_N:
        middle = integrate(
            macro, s * ell, s * scheme.r_N, quad,
            points=_two_sided_points(s * ell, s * scheme.r_N, s * ell),
            label="rescaled:middle",
        )
        right = integrate(
            raw, N * s * scheme.r_N, N * s, quad,
            points=[N * s - h for h in geometric_points(1.0, N * s * ell)],
            label="rescaled:right",
        )
    else:
        middle = integrate(
            macro, s * ell, s, quad,
            points=geometric_points(4.0 * s * ell, s),
            label="rescaled:middle",
        )
        right = QuadResult(label="rescaled:right", value=0.0, abserr=0.0)

    total = combine("rescaled", left, middle, right)
    constant = recentering_constant(N, quad)
    no_limit = s == t and tuple(p1.x) == tuple(p2.x)
    logger.info(
        "Rescaled covariance computed",
        N=N, s=s, t=t, raw=total.value, abserr=total.abserr, no_limit=no_limit,
    )
    return CovarianceReport(
        N=N,
        raw_value=total.value,
        recentered_value=total.value - constant,
        quadrature_error=total.abserr,
        interval_breakdown=(left.value, middle.value, right.value),
        no_limit=no_limit,
        audit=(left, middle, right),
    )


def _rescaled_cell(
    cell: Tuple[SpaceTimePoint, SpaceTimePoint, ScalingScheme, QuadratureConfig]
) -> CovarianceReport:
    return covariance_rescaled(*cell)


def rescaled_sweep(
    p1: SpaceTimePoint,
    p2: SpaceTimePoint,
    schemes: Sequence[ScalingScheme],
    quad: QuadratureConfig = QuadratureConfig(),
    workers: Optional[int] = 1
) -> List[CovarianceReport]:
    """covariance_rescaled at every level, one sweep cell per N, in scheme order."""
    cells = [(p1, p2, scheme, quad) for scheme in schemes]
    return run_sweep(_rescaled_cell, cells, workers)


def obj_consistency(
    p1: SpaceTimePoint,
    p2: SpaceTimePoint,
    scheme: ScalingScheme,
    quad: QuadratureConfig = QuadratureConfig()
) -> IdentityCheck:
    """
    integral_0^{Ns} b^N in raw time against integral_0^s b_N in macroscopic time.

    Passes when the two agree within twice the summed error estimates.
    """
    s = p1.t
    N = scheme.N
    raw, macro = _rescaled_kernels(p1, p2, scheme)
    whole_raw = integrate(
        raw, 0.0, N * s, quad,
        points=_two_sided_points(0.0, N * s, 1.0),
        label="consistency:raw",
    )
    whole_macro = integrate(
        macro, 0.0, s, quad,
        points=_two_sided_points(0.0, s, 1.0 / N),
        label="consistency:macro",
    )
    return IdentityCheck(
        name="obj_consistency",
        lhs=whole_raw.value,
        rhs=whole_macro.value,
        tolerance=2.0 * (whole_raw.abserr + whole_macro.abserr) + 1e-9 * abs(whole_raw.value),
    )


def _poisson_match(lam: float, lam_prime: float) -> float:
    """P(V(lam) = V'(lam')), allowing one zero mean."""
    if lam <= 0.0:
        return math.exp(-lam_prime)
    if lam_prime <= 0.0:
        return math.exp(-lam)
    return skellam_match(PoissonPair(lam, lam_prime), 0)


def poisson_left_surrogate(
    p1: SpaceTimePoint,
    p2: SpaceTimePoint,
    scheme: ScalingScheme,
    quad: QuadratureConfig = QuadratureConfig()
) -> QuadResult:
    """
    Left-interval integral with each matching probability replaced by
    P(V(M_j rho/(Ns)) = V'(M'_j rho/(Nt))).
    """
    N = scheme.N
    s, t = p1.t, p2.t
    M = death_pair_at(p1.x, s, N).as_tuple()
    Mp = death_pair_at(p2.x, t, N).as_tuple()

    def surrogate(rho: float) -> float:
        return (
            _poisson_match(M[0] * rho / (N * s), Mp[0] * rho / (N * t))
            * _poisson_match(M[1] * rho / (N * s), Mp[1] * rho / (N * t))
        )

    upper = N * s * scheme.ell_N
    return integrate(
        surrogate, 0.0, upper, quad,
        points=geometric_points(1.0, upper),
        label="poisson_surrogate",
    )


def poisson_surrogate_gap(
    p1: SpaceTimePoint,
    p2: SpaceTimePoint,
    scheme: ScalingScheme,
    quad: QuadratureConfig = QuadratureConfig()
) -> float:
    """|left-interval integral - poisson_left_surrogate|."""
    raw, _ = _rescaled_kernels(p1, p2, scheme)
    upper = scheme.N * p1.t * scheme.ell_N
    exact = integrate(
        raw, 0.0, upper, quad,
        points=geometric_points(1.0, upper),
        label="rescaled:left",
    )
    return abs(exact.value - poisson_left_surrogate(p1, p2, scheme, quad).value)


def check_scaling_conditions(
    p1: SpaceTimePoint,
    p2: SpaceTimePoint,
    scheme: ScalingScheme,
    T0: float = DEFAULT_T0,
    T1: float = DEFAULT_T1
) -> CheckResult:
    """
    Primary and secondary conditions over [T0, T1].

    Primary violations are errors; a secondary violation is a warning since
    only the sharper Poisson estimates rely on it.
    """
    result = CheckResult()
    N, eta = scheme.N, scheme.eta
    if not 0.0 < T0 < 1.0 < T1:
        result.add_error(f"Need 0 < T0 < 1 < T1, got T0={T0}, T1={T1}")

    bound = 0.5 * N ** eta
    for name, coords in (("x", p1.x), ("y", p2.x)):
        for j, value in enumerate(coords, start=1):
            if abs(value) > bound:
                result.add_error(f"|{name}{j}| = {abs(value)} exceeds N^eta/2 = {bound:.6g}")

    if not T0 <= p1.t <= p2.t <= T1:
        result.add_error(f"Need T0 <= s <= t <= T1, got s={p1.t}, t={p2.t} on [{T0}, {T1}]")

    blocks = scheme.integer_constraint(T0)
    if blocks < 1:
        result.add_error(f"floor(T0 N^(1/2-eta)/2) = {blocks} < 1 at N={N}")

    separation = 4.0 / (T0 * math.sqrt(N))
    gap = min(abs(p1.x[0] - p2.x[0]), abs(p1.x[1] - p2.x[1]))
    if gap < separation:
        result.add_warning(f"Secondary condition fails: min |x_j - y_j| = {gap:.6g} < {separation:.6g}")

    result.info.update({
        'N': N,
        'eta': eta,
        'ell_N': scheme.ell_N,
        'tau_N': scheme.tau_N,
        'integer_constraint': blocks,
    })
    return result


# Re-centering constants

def _c1_integrand(r: float) -> float:
    if r <= 0.0:
        return 1.0
    match = skellam_match(PoissonPair(r, r), 0)
    indicator = 2.0 if r >= 1.0 else 0.0
    return match * match + (math.exp(-0.25 / r) - indicator) / (FOUR_PI * r)


def c1_integral(quad: QuadratureConfig = QuadratureConfig()) -> QuadResult:
    """
    c_1 = integral_0^inf [P(V(r) = V'(r))^2 + (e^{-1/(4r)} - 2 1_{r >= 1}) / (4 pi r)] dr.

    Integrated on [0, 1] and on [1, r_max] in ln r. Beyond r_max the
    integrand is -1/(32 pi r^2) + O(r^-3), which gives the closed-form tail
    and its error bound.
    """
    R = quad.r_max
    head = integrate(_c1_integrand, 0.0, 1.0, quad, points=[0.01, 0.05, 0.25], label="c1:head")
    body = integrate(_c1_integrand, 1.0, R, quad, transform="log", label="c1:body")
    tail = QuadResult(
        label="c1:tail",
        value=-1.0 / (32.0 * math.pi * R),
        abserr=2.0 * 9.0 / (1024.0 * math.pi * R * R),
    )
    return combine("c1", head, body, tail)


@lru_cache(maxsize=16)
def c1_constant(quad: QuadratureConfig = QuadratureConfig()) -> float:
    """The re-centering constant c_1."""
    result = c1_integral(quad)
    logger.info("c_1 computed", value=result.value, abserr=result.abserr, r_max=quad.r_max)
    return result.value


def recentering_constant(N: int, quad: QuadratureConfig = QuadratureConfig()) -> float:
    """c_N = c_1 + ln N / (4 pi)."""
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    return c1_constant(quad) + math.log(N) / FOUR_PI


# Increment metric

def increment_metric(
    m: DeathPair,
    s: float,
    t: float,
    quad: QuadratureConfig = QuadratureConfig()
) -> float:
    """
    E|zeta_s Sigma(m) - zeta_t Sigma(m)|^2.

    Assembled as integral_s^t f(r; t, t) dr plus
    integral_0^s [f(r; s, s) + f(r; t, t) - 2 f(r; s, t)] dr with
    f(r; u, v) = prod_j P(S_{m_j}(r/u) = S'_{m_j}(r/v)).
    """
    if not 0.0 <= s <= t:
        raise ValueError(f"Need 0 <= s <= t, got s={s}, t={t}")
    if s == t:
        return 0.0
    pair = m.as_tuple()
    f_tt = _match_product(pair, pair, t, t)
    scale = 1.0 / (4.0 * max(1, m.sup_norm))

    later = integrate(
        f_tt, s, t, quad,
        points=_two_sided_points(s, t, (t - s) * scale),
        label="increment:later",
    )
    if s == 0.0:
        return later.value

    f_ss = _match_product(pair, pair, s, s)
    f_st = _match_product(pair, pair, s, t)
    earlier = integrate(
        lambda r: f_ss(r) + f_tt(r) - 2.0 * f_st(r), 0.0, s, quad,
        points=_two_sided_points(0.0, s, s * scale),
        label="increment:earlier",
    )
    return later.value + earlier.value


def increment_modulus_scan(
    ms: Sequence[DeathPair],
    pairs: Sequence[Tuple[float, float]],
    quad: QuadratureConfig = QuadratureConfig()
) -> Tuple[List[ModulusRow], float]:
    """
    Ratios increment_metric / ((||m||_inf v 1) |t - s|) over a grid.

    Returns:
        The rows and the fitted constant (largest ratio, 0 for an empty grid)
    """
    rows = []
    for m in ms:
        for s, t in pairs:
            value = increment_metric(m, s, t, quad)
            ratio = value / (max(1, m.sup_norm) * (t - s)) if t > s else 0.0
            rows.append(ModulusRow(m=m, s=s, t=t, value=value, ratio=ratio))
    constant = max((row.ratio for row in rows), default=0.0)
    logger.info("Increment modulus scanned", cells=len(rows), constant=constant)
    return rows, constant
