"""
Weak-form covariances of the rescaled field and the Hoelder decomposition.

For Gaussian-mixture test functions every bump is a product of two
one-dimensional Gaussians, so the spatial integrals factor over the
coordinates. Each coordinate integral is a Gauss-Hermite sum whose
matching probabilities come from one match_prob_matrix product; nodes
below -sqrt(N) carry no weight.
"""
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import structlog
from numpy.polynomial.hermite import hermgauss

from whitlab.core.binomial import match_prob_matrix
from whitlab.core.covariance import lattice_index, recentering_constant
from whitlab.core.elements import (
    DEFAULT_T0,
    DEFAULT_T1,
    GaussianMixture,
    HolderReport,
    QuadResult,
    QuadratureConfig,
    ScalingScheme,
)
from whitlab.utils.quadrature import combine, geometric_points, integrate
from whitlab.utils.sweep import run_sweep

logger = structlog.get_logger(__name__)


@dataclass(frozen=True)
class _CoordinateNodes:
    """Lattice indices and weights of the Gauss-Hermite nodes of every bump along one axis."""
    indices: np.ndarray
    weights: np.ndarray


@dataclass
class HolderScan:
    """Rows of a Hoelder scan and the constant fitted to each ratio column."""
    reports: List[HolderReport] = field(default_factory=list)
    constants: Dict[str, float] = field(default_factory=dict)
    spreads: Dict[str, float] = field(default_factory=dict)

    def to_rows(self) -> List[dict]:
        return [r.to_dict() for r in self.reports]


RATIO_COLUMNS = ('ratio_I_half', 'ratio_J_one', 'ratio_K_one')


def _nodes(
    phi: GaussianMixture,
    axis: int,
    time: float,
    scheme: ScalingScheme,
    n_nodes: int
) -> _CoordinateNodes:
    z, w = hermgauss(n_nodes)
    floor = -scheme.sqrt_N
    indices = np.zeros((len(phi), n_nodes), dtype=np.int64)
    weights = np.zeros((len(phi), n_nodes))
    for a, term in enumerate(phi.terms):
        xs = term.center[axis] + math.sqrt(2.0 * term.width) * z
        for k, x in enumerate(xs):
            if x >= floor:
                indices[a, k] = lattice_index(float(x), time, scheme.N)
                weights[a, k] = w[k] / math.sqrt(math.pi)
    return _CoordinateNodes(indices=indices, weights=weights)


def weak_kernel(
    phi1: GaussianMixture,
    u: float,
    phi2: GaussianMixture,
    v: float,
    scheme: ScalingScheme,
    n_nodes: int
) -> Callable[[float], float]:
    """
    rho -> double integral of phi1(x) phi2(y) b^N(x, y; rho, u, v) in raw time rho.

    b^N is the product over both axes of
    P(S_{M(x_j,u)}(rho/(Nu)) = S'_{M(y_j,v)}(rho/(Nv))).
    """
    N = scheme.N
    left = [_nodes(phi1, j, u, scheme, n_nodes) for j in range(2)]
    right = [_nodes(phi2, j, v, scheme, n_nodes) for j in range(2)]
    weights = np.outer([t.weight for t in phi1.terms], [t.weight for t in phi2.terms])
    A, B = len(phi1), len(phi2)

    def kernel(rho: float) -> float:
        p = min(1.0, max(0.0, rho / (N * u)))
        q = min(1.0, max(0.0, rho / (N * v)))
        product = weights.copy()
        for j in range(2):
            P = match_prob_matrix(left[j].indices.ravel(), p, right[j].indices.ravel(), q)
            P = P.reshape(A, n_nodes, B, n_nodes)
            product *= np.einsum('ak,akbl,bl->ab', left[j].weights, P, right[j].weights)
        return float(product.sum())

    return kernel


def _integrate_macroscopic(
    kernel: Callable[[float], float],
    lower: float,
    upper: float,
    scheme: ScalingScheme,
    quad: QuadratureConfig,
    label: str,
    right_raw: bool = True
) -> Tuple[QuadResult, QuadResult, QuadResult]:
    """
    integral_lower^upper N kernel(N r) dr in three pieces.

    The first and last ell_N fraction of the interval are integrated in raw
    time rho = N r; the middle in macroscopic time. With right_raw False the
    middle runs to the upper end.
    """
    N = scheme.N
    if upper <= lower:
        empty = QuadResult(label=label, value=0.0, abserr=0.0)
        return empty, empty, empty
    edge = (upper - lower) * scheme.ell_N
    raw_width = N * edge

    left = integrate(
        kernel, N * lower, N * (lower + edge), quad,
        points=[N * lower + h for h in geometric_points(1.0, raw_width)],
        label=f"{label}:left",
    )
    middle_upper = upper - edge if right_raw else upper
    half = 0.5 * (middle_upper - lower - edge)
    hints = [lower + edge + h for h in geometric_points(edge, half)]
    hints += [middle_upper - h for h in geometric_points(edge, half)]
    middle = integrate(
        lambda r: N * kernel(N * r), lower + edge, middle_upper, quad,
        points=hints,
        label=f"{label}:middle",
    )
    if right_raw:
        right = integrate(
            kernel, N * (upper - edge), N * upper, quad,
            points=[N * upper - h for h in geometric_points(1.0, raw_width)],
            label=f"{label}:right",
        )
    else:
        right = QuadResult(label=f"{label}:right", value=0.0, abserr=0.0)
    return left, middle, right


def weak_rescaled_result(
    phi1: GaussianMixture,
    phi2: GaussianMixture,
    s: float,
    t: float,
    scheme: ScalingScheme,
    quad: QuadratureConfig = QuadratureConfig()
) -> QuadResult:
    """weak_rescaled_covariance with its quadrature audit."""
    if not 0.0 < s <= t:
        raise ValueError(f"Need 0 < s <= t, got s={s}, t={t}")
    kernel = weak_kernel(phi1, s, phi2, t, scheme, quad.spatial_nodes)
    pieces = _integrate_macroscopic(
        kernel, 0.0, s, scheme, quad, "weak",
        right_raw=t - s <= scheme.tau_N,
    )
    return combine("weak", *pieces)


def weak_rescaled_covariance(
    phi1: GaussianMixture,
    phi2: GaussianMixture,
    s: float,
    t: float,
    scheme: ScalingScheme,
    quad: QuadratureConfig = QuadratureConfig()
) -> float:
    """
    Cov[zeta^N_s(phi1); zeta^N_t(phi2)] over the domain x, y >= -sqrt(N).

    Args:
        phi1: Test function at time s
        phi2: Test function at time t
        s: Earlier time
        t: Later time, s <= t
        scheme: Rescaling level
        quad: Tolerances; spatial_nodes sets the Gauss-Hermite order

    Raises:
        QuadratureError: If the time integral does not converge
    """
    result = weak_rescaled_result(phi1, phi2, s, t, scheme, quad)
    logger.debug("Weak covariance computed", N=scheme.N, s=s, t=t, value=result.value)
    return result.value


def _weak_cell(
    cell: Tuple[GaussianMixture, GaussianMixture, float, float, ScalingScheme, QuadratureConfig]
) -> QuadResult:
    return weak_rescaled_result(*cell)


def weak_sweep(
    phi1: GaussianMixture,
    phi2: GaussianMixture,
    s: float,
    t: float,
    schemes: Sequence[ScalingScheme],
    quad: QuadratureConfig = QuadratureConfig(),
    workers: Optional[int] = 1
) -> List[QuadResult]:
    """weak_rescaled_result at every level, in scheme order."""
    cells = [(phi1, phi2, s, t, scheme, quad) for scheme in schemes]
    return run_sweep(_weak_cell, cells, workers)


def weak_recentered_covariance(
    phi1: GaussianMixture,
    phi2: GaussianMixture,
    s: float,
    t: float,
    scheme: ScalingScheme,
    quad: QuadratureConfig = QuadratureConfig()
) -> float:
    """weak_rescaled_covariance - c_N (integral phi1)(integral phi2)."""
    raw = weak_rescaled_covariance(phi1, phi2, s, t, scheme, quad)
    masses = phi1.total_mass * phi2.total_mass
    if masses == 0.0:
        return raw
    return raw - recentering_constant(scheme.N, quad) * masses


def weak_increment(
    phi: GaussianMixture,
    s: float,
    t: float,
    scheme: ScalingScheme,
    quad: QuadratureConfig = QuadratureConfig()
) -> float:
    """E|zeta^N_s(phi) - zeta^N_t(phi)|^2 = Var_s + Var_t - 2 Cov_{s,t}."""
    var_s = weak_rescaled_covariance(phi, phi, s, s, scheme, quad)
    var_t = weak_rescaled_covariance(phi, phi, t, t, scheme, quad)
    cov = weak_rescaled_covariance(phi, phi, s, t, scheme, quad)
    return var_s + var_t - 2.0 * cov


def holder_decomposition(
    phi: GaussianMixture,
    s: float,
    t: float,
    scheme: ScalingScheme,
    quad: QuadratureConfig = QuadratureConfig(),
    T0: float = DEFAULT_T0,
    T1: float = DEFAULT_T1,
    cross_check: bool = False
) -> HolderReport:
    """
    E|zeta^N_s(phi) - zeta^N_t(phi)|^2 = I_N - J_N - K_N.

    With F(r; u, v) the weak kernel in macroscopic time,
        I_N = integral_s^t F(r; t, t) dr,
        J_N = integral_0^s [F(r; s, t) - F(r; s, s)] dr,
        K_N = integral_0^s [F(r; s, t) - F(r; t, t)] dr.

    Args:
        phi: Mass-zero test function
        s: Earlier time in [T0, T1)
        t: Later time in (s, T1]
        scheme: Rescaling level
        quad: Tolerances
        T0: Lower end of the time window
        T1: Upper end of the time window
        cross_check: Also evaluate the polarization Var_s + Var_t - 2 Cov

    Raises:
        ValueError: If the times leave [T0, T1] or phi has nonzero mass
    """
    if not T0 <= s < t <= T1:
        raise ValueError(f"Need T0 <= s < t <= T1, got s={s}, t={t} on [{T0}, {T1}]")
    if not phi.is_mass_zero():
        raise ValueError(f"Hoelder decomposition needs a mass-zero phi, got mass {phi.total_mass}")

    n = quad.spatial_nodes
    f_tt = weak_kernel(phi, t, phi, t, scheme, n)
    f_st = weak_kernel(phi, s, phi, t, scheme, n)
    f_ss = weak_kernel(phi, s, phi, s, scheme, n)

    I = combine("holder:I", *_integrate_macroscopic(f_tt, s, t, scheme, quad, "holder:I"))
    J = combine("holder:J", *_integrate_macroscopic(
        lambda rho: f_st(rho) - f_ss(rho), 0.0, s, scheme, quad, "holder:J"))
    K = combine("holder:K", *_integrate_macroscopic(
        lambda rho: f_st(rho) - f_tt(rho), 0.0, s, scheme, quad, "holder:K"))

    gap = t - s
    total = I.value - J.value - K.value
    polarization: Optional[float] = None
    if cross_check:
        polarization = weak_increment(phi, s, t, scheme, quad)

    report = HolderReport(
        N=scheme.N,
        s=s,
        t=t,
        I_N=I.value,
        J_N=J.value,
        K_N=K.value,
        total=total,
        ratio_half=total / math.sqrt(gap),
        ratio_one_J=abs(J.value) / gap,
        ratio_one_K=abs(K.value) / gap,
        ratio_half_I=abs(I.value) / math.sqrt(gap),
        quadrature_error=I.abserr + J.abserr + K.abserr,
        polarization=polarization,
    )
    logger.info(
        "Hoelder decomposition computed",
        N=scheme.N, s=s, t=t, I=I.value, J=J.value, K=K.value, total=total,
    )
    return report


def column_spread(reports: Sequence[HolderReport], column: str) -> float:
    """max / min of a ratio column over its nonzero entries; 1 when fewer than two."""
    values = [abs(r.to_dict()[column]) for r in reports]
    values = [v for v in values if v > 0.0]
    if len(values) < 2:
        return 1.0
    return max(values) / min(values)


def _holder_cell(
    cell: Tuple[GaussianMixture, float, float, ScalingScheme, QuadratureConfig, float, float]
) -> HolderReport:
    return holder_decomposition(*cell)


def holder_scan(
    phi: GaussianMixture,
    s_t_grid: Sequence[Tuple[float, float]],
    schemes: Sequence[ScalingScheme],
    quad: QuadratureConfig = QuadratureConfig(),
    T0: float = DEFAULT_T0,
    T1: float = DEFAULT_T1,
    workers: Optional[int] = 1
) -> HolderScan:
    """
    Hoelder decomposition over every (s, t) cell and every N.

    Each ratio column gets one constant (its largest absolute entry) and a
    spread max/min; boundedness means the spread stays small as the grid
    is refined.
    """
    cells = [(phi, s, t, scheme, quad, T0, T1) for scheme in schemes for s, t in s_t_grid]
    scan = HolderScan(reports=run_sweep(_holder_cell, cells, workers))
    for column in RATIO_COLUMNS:
        values = [abs(r.to_dict()[column]) for r in scan.reports]
        scan.constants[column] = max(values, default=0.0)
        scan.spreads[column] = column_spread(scan.reports, column)
    logger.info("Hoelder scan finished", cells=len(scan.reports), constants=scan.constants)
    return scan
