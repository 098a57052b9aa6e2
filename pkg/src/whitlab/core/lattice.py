"""
Triangular lattice, coordinate maps and the Whittaker generator.

The generator A_L has two jump types out of a = (a1, a2): to a - (1,1) at
rate a1 - 1 and to a - (0,1) at rate a2 - a1. Its semigroup is computed
twice, densely by the matrix exponential and in product form through two
independent pure death chains.
"""
import math
from functools import lru_cache
from typing import Sequence, Tuple

import numpy as np
import structlog
from scipy.linalg import expm

from whitlab.core.binomial import binom_pmf
from whitlab.core.elements import (
    BinomialSpec,
    DeathPair,
    GeneratorMatrix,
    LatticePoint,
    lattice_size,
)

logger = structlog.get_logger(__name__)

MIN_LATTICE_L = 3


def sigma_map(m: DeathPair) -> LatticePoint:
    """Sum map (m1, m2) -> (m1 + 1, m1 + m2 + 1)."""
    return LatticePoint.of(m.m1 + 1, m.m1 + m.m2 + 1)


def delta_map(a: LatticePoint) -> DeathPair:
    """Difference map (a1, a2) -> (a1 - 1, a2 - a1), inverse of sigma_map."""
    return DeathPair(a.a1 - 1, a.a2 - a.a1)


@lru_cache(maxsize=64)
def lattice_points(L: int) -> Tuple[LatticePoint, ...]:
    """
    Points of the truncated lattice in matrix order.

    Points are sorted lexicographically by (a2, a1), so for L = 3 the order
    is (1,1), (1,2), (2,2), (1,3), (2,3), (3,3).

    Args:
        L: Truncation level

    Returns:
        Tuple of L(L+1)/2 lattice points
    """
    if L < 1:
        raise ValueError(f"L must be positive, got {L}")
    return tuple(
        LatticePoint.of(a1, a2)
        for a2 in range(1, L + 1)
        for a1 in range(1, a2 + 1)
    )


def lattice_position(a: LatticePoint) -> int:
    """Matrix index of a under the (a2, a1) ordering."""
    return (a.a2 - 1) * a.a2 // 2 + (a.a1 - 1)


def generator(L: int) -> GeneratorMatrix:
    """
    Build the generator A_L.

    Args:
        L: Truncation level, at least 3

    Returns:
        GeneratorMatrix with rows summing to zero

    Raises:
        ValueError: If L < 3
    """
    if L < MIN_LATTICE_L:
        raise ValueError(f"Generator needs L >= {MIN_LATTICE_L}, got {L}")

    points = lattice_points(L)
    entries = np.zeros((len(points), len(points)))
    for i, a in enumerate(points):
        if a.a1 > 1:
            entries[i, lattice_position(LatticePoint.of(a.a1 - 1, a.a2 - 1))] = a.a1 - 1
        if a.a2 > a.a1:
            entries[i, lattice_position(LatticePoint.of(a.a1, a.a2 - 1))] = a.a2 - a.a1
        entries[i, i] = -entries[i].sum()

    entries.setflags(write=False)
    return GeneratorMatrix(L=L, points=points, entries=entries)


def semigroup_dense(L: int, t: float) -> np.ndarray:
    """
    e^{t A_L} by Pade scaling and squaring.

    Round-off entries in [-1e-12, 1 + 1e-12] are clipped into [0, 1].

    Args:
        L: Truncation level, at least 3
        t: Nonnegative time

    Returns:
        Row-stochastic matrix in lattice order
    """
    if t < 0:
        raise ValueError(f"Semigroup time must be >= 0, got {t}")
    A = generator(L).entries
    if t == 0:
        return np.eye(A.shape[0])
    P = np.clip(expm(t * A), 0.0, 1.0)
    logger.debug("Dense semigroup computed", L=L, t=t, max_row_defect=float(np.abs(P.sum(axis=1) - 1).max()))
    return P


def semigroup_product(a: LatticePoint, b: LatticePoint, t: float) -> float:
    """
    Entry e^{tA}(a, b) in product form.

    Returns P(S_{m1}(e^-t) = n1) * P(S_{m2}(e^-t) = n2) with (m1, m2) and
    (n1, n2) the death pairs of a and b.
    """
    if t < 0:
        raise ValueError(f"Semigroup time must be >= 0, got {t}")
    m, n = delta_map(a), delta_map(b)
    survival = math.exp(-t)
    return (
        binom_pmf(BinomialSpec(m.m1, survival), n.m1)
        * binom_pmf(BinomialSpec(m.m2, survival), n.m2)
    )


def semigroup_product_matrix(L: int, t: float) -> np.ndarray:
    """The whole product-form matrix on the truncated lattice."""
    points = lattice_points(L)
    size = lattice_size(L)
    P = np.zeros((size, size))
    for i, a in enumerate(points):
        for j, b in enumerate(points[: i + 1]):
            if b.a1 <= a.a1 and b.a2 - b.a1 <= a.a2 - a.a1:
                P[i, j] = semigroup_product(a, b, t)
    return P


def whittaker_mean(L: int, xi0: Sequence[float], t: float) -> np.ndarray:
    """
    Deterministic part e^{(ln t) A_L} xi0 of the explicit SDE solution.

    Args:
        L: Truncation level
        xi0: Initial vector in lattice order
        t: Positive time

    Returns:
        Mean vector of xi_t in lattice order
    """
    if t <= 0:
        raise ValueError(f"Time must be positive, got {t}")
    xi = np.asarray(xi0, dtype=float)
    if xi.shape != (lattice_size(L),):
        raise ValueError(f"xi0 must have {lattice_size(L)} entries, got {xi.shape}")
    return expm(math.log(t) * generator(L).entries) @ xi
