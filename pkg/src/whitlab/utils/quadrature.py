"""
Segmented adaptive quadrature with an audit trail.

Every one-dimensional integral in the laboratory goes through integrate():
the interval is cut at the caller's split hints, each segment is handed to
QUADPACK (scipy.integrate.quad), and the per-segment values and error
estimates are kept so the CLI can publish them.
"""
import math
from typing import Callable, Iterable, List, Optional, Sequence

import numpy as np
import structlog
from scipy import integrate as sp_integrate

from whitlab.core.elements import QuadResult, QuadSegment, QuadratureConfig
from whitlab.errors import QuadratureError

logger = structlog.get_logger(__name__)

TRANSFORMS = ("identity", "log")


def _split(a: float, b: float, points: Optional[Iterable[float]]) -> List[float]:
    """Sorted breakpoints strictly inside (a, b), with the ends attached."""
    inner = sorted({float(p) for p in (points or ()) if a < p < b})
    return [a] + inner + [b]


def _segment(
    func: Callable[[float], float],
    lower: float,
    upper: float,
    quad: QuadratureConfig,
    transform: str,
    label: str
) -> QuadSegment:
    if transform == "log" and lower > 0 and math.isfinite(upper):
        def integrand(u: float) -> float:
            r = math.exp(u)
            return func(r) * r
        lo, hi = math.log(lower), math.log(upper)
        used = "log"
    else:
        integrand = func
        lo, hi = lower, upper
        used = "identity"

    out = sp_integrate.quad(
        integrand, lo, hi,
        epsabs=quad.epsabs,
        epsrel=quad.epsrel,
        limit=quad.limit,
        full_output=1,
    )
    value, abserr, info = float(out[0]), float(out[1]), out[2]
    message = out[3] if len(out) > 3 else None

    tolerance = quad.tolerance_for(value)
    if not np.isfinite(value) or abserr > quad.failure_factor * tolerance:
        logger.error(
            "Quadrature segment failed",
            label=label, lower=lower, upper=upper,
            abserr=abserr, tolerance=tolerance, message=message
        )
        raise QuadratureError(label, abserr, tolerance)
    if message:
        logger.debug(
            "Quadrature segment accepted with warning",
            label=label, lower=lower, upper=upper, abserr=abserr
        )

    return QuadSegment(
        lower=lower,
        upper=upper,
        value=value,
        abserr=abserr,
        neval=int(info.get('neval', 0)),
        transform=used,
    )


def integrate(
    func: Callable[[float], float],
    a: float,
    b: float,
    quad: QuadratureConfig,
    points: Optional[Sequence[float]] = None,
    transform: str = "identity",
    label: str = "integral"
) -> QuadResult:
    """
    Integrate func over [a, b] segment by segment.

    Args:
        func: Scalar integrand
        a: Lower limit (finite)
        b: Upper limit (may be +inf)
        quad: Tolerances and subdivision limit
        points: Split hints; only those strictly inside (a, b) are used
        transform: "log" integrates finite positive segments in ln r
        label: Name used in logs, errors and the audit trail

    Returns:
        QuadResult with the summed value, summed error and the segments

    Raises:
        QuadratureError: If a segment misses its tolerance by more than
            quad.failure_factor
        ValueError: For an empty or reversed interval or unknown transform
    """
    if transform not in TRANSFORMS:
        raise ValueError(f"Unknown quadrature transform: {transform}")
    if not a <= b:
        raise ValueError(f"Integration interval [{a}, {b}] is reversed")
    if a == b:
        return QuadResult(label=label, value=0.0, abserr=0.0)

    breaks = _split(a, b, points)
    segments = [
        _segment(func, lo, hi, quad, transform, label)
        for lo, hi in zip(breaks[:-1], breaks[1:])
    ]

    value = math.fsum(s.value for s in segments)
    abserr = math.fsum(s.abserr for s in segments)
    logger.debug(
        "Integral evaluated",
        label=label, value=value, abserr=abserr, segments=len(segments)
    )
    return QuadResult(label=label, value=value, abserr=abserr, segments=tuple(segments))


def geometric_points(lower: float, upper: float, ratio: float = 4.0) -> List[float]:
    """
    Split hints lower, lower*ratio, lower*ratio^2, ... below upper.

    Used where an integrand varies on the scale of its distance to 0.
    """
    if lower <= 0 or upper <= lower:
        return []
    points = []
    p = lower
    while p < upper:
        points.append(p)
        p *= ratio
    return points


def combine(label: str, *results: QuadResult) -> QuadResult:
    """Sum several integrals into one audited result."""
    segments = tuple(s for r in results for s in r.segments)
    return QuadResult(
        label=label,
        value=math.fsum(r.value for r in results),
        abserr=math.fsum(r.abserr for r in results),
        segments=segments,
    )
