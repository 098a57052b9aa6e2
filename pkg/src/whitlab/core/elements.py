"""
Domain elements of the Whittaker laboratory.

This module defines the data structures shared by the lattice, covariance,
limit and simulation layers: lattice points, binomial and Poisson
parameters, scaling schemes, quadrature settings, test-function mixtures
and the report records emitted by the engines.
"""
import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np


# Rescaling defaults
DEFAULT_ETA = 0.25
DEFAULT_T0 = 0.5
DEFAULT_T1 = 2.0
MIN_SCALING_N = 16

# Matching-probability window: k within MATCH_WINDOW_SIGMAS standard
# deviations of each mode plus MATCH_WINDOW_PAD lattice sites
MATCH_WINDOW_SIGMAS = 12.0
MATCH_WINDOW_PAD = 25
MATCH_TAIL_TARGET = 1e-15

# Relative eigenvalue clipping threshold for near-PSD covariance matrices
EIGEN_CLIP_RELATIVE = 1e-10

# Heat-kernel comparison |g(a;x) - g(b;y)| <= C (|b-a|/a^1.5 + |x-y|/b).
# Calibrated on a 100x100 log-spaced (a, b) grid over [1e-3, 1e3] with
# |x|, |y| <= 10; the largest observed ratio was below 0.35.
HEAT_KERNEL_LIPSCHITZ_C = 1.0
HEAT_KERNEL_CALIBRATION_GRID = {
    'a_range': (1e-3, 1e3),
    'b_range': (1e-3, 1e3),
    'x_range': (-10.0, 10.0),
    'points': 10_000,
}

DIMENSION = 2


@dataclass(frozen=True)
class LatticePoint:
    """
    Point a = (a1, a2) of the upper triangular lattice, 1 <= a1 <= a2.

    Matrices indexed by the lattice order points lexicographically in
    (a2, a1); see sort_key.
    """
    a1: int
    a2: int

    def __post_init__(self) -> None:
        if self.a1 < 1 or self.a2 < self.a1:
            raise ValueError(
                f"({self.a1}, {self.a2}) is not in the triangular lattice "
                f"(need 1 <= a1 <= a2)"
            )

    @classmethod
    def of(cls, a1: int, a2: int) -> 'LatticePoint':
        return cls(a1=a1, a2=a2)

    @property
    def sort_key(self) -> Tuple[int, int]:
        return (self.a2, self.a1)

    def as_tuple(self) -> Tuple[int, int]:
        """Return (a1, a2)."""
        return (self.a1, self.a2)

    def __repr__(self) -> str:
        return f"LatticePoint({self.a1}, {self.a2})"


@dataclass(frozen=True)
class DeathPair:
    """Initial populations (m1, m2) of two independent pure death chains."""
    m1: int
    m2: int

    def __post_init__(self) -> None:
        if self.m1 < 0 or self.m2 < 0:
            raise ValueError(f"Death pair entries must be >= 0, got ({self.m1}, {self.m2})")

    def as_tuple(self) -> Tuple[int, int]:
        return (self.m1, self.m2)

    @property
    def sup_norm(self) -> int:
        return max(self.m1, self.m2)


@dataclass(frozen=True, eq=False)
class GeneratorMatrix:
    """
    Generator A_L of the Whittaker SDE drift on the truncated lattice.

    Attributes:
        L: Truncation level (lattice points with a2 <= L)
        points: Lattice points in matrix order
        entries: Rate matrix, rows summing to zero
    """
    L: int
    points: Tuple[LatticePoint, ...]
    entries: np.ndarray

    @property
    def dimension(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class BinomialSpec:
    """Binomial law S_m(p): m independent Bernoulli(p) summands."""
    m: int
    p: float

    def __post_init__(self) -> None:
        if self.m < 0:
            raise ValueError(f"Trial count must be >= 0, got {self.m}")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"Success probability must be in [0, 1], got {self.p}")

    @property
    def mean(self) -> float:
        return self.m * self.p

    @property
    def variance(self) -> float:
        return self.m * self.p * (1.0 - self.p)


@dataclass(frozen=True)
class PoissonPair:
    """Means of independent Poisson variables V(lam) and V'(lam_prime)."""
    lam: float
    lam_prime: float

    def __post_init__(self) -> None:
        if self.lam < 0 or self.lam_prime < 0:
            raise ValueError(
                f"Poisson means must be >= 0, got ({self.lam}, {self.lam_prime})"
            )

    @property
    def total(self) -> float:
        return self.lam + self.lam_prime


@dataclass(frozen=True)
class LcltParams:
    """Parameters of the binomial local CLT for S_M(q) - S'_M'(q')."""
    M: int
    M_prime: int
    q: float
    q_prime: float
    N: int

    def __post_init__(self) -> None:
        if self.M < 0 or self.M_prime < 0:
            raise ValueError("Trial counts must be >= 0")
        if not (0.0 <= self.q <= 1.0 and 0.0 <= self.q_prime <= 1.0):
            raise ValueError("q and q_prime must be probabilities")
        if self.N < 1:
            raise ValueError(f"N must be positive, got {self.N}")

    @property
    def mu(self) -> float:
        return (self.M * self.q - self.M_prime * self.q_prime) / math.sqrt(self.N)

    @property
    def sigma_sq(self) -> float:
        return (
            self.M / self.N * self.q * (1.0 - self.q)
            + self.M_prime / self.N * self.q_prime * (1.0 - self.q_prime)
        )


@dataclass(frozen=True)
class ScalingScheme:
    """
    Edwards-Wilkinson rescaling at level N.

    The cutoffs satisfy ell_N = tau_N = N^-(1/2 + eta) and r_N = 1 - ell_N.
    """
    N: int
    eta: float = DEFAULT_ETA

    def __post_init__(self) -> None:
        if self.N < MIN_SCALING_N:
            raise ValueError(f"N must be >= {MIN_SCALING_N}, got {self.N}")
        if not 0.0 < self.eta < 0.5:
            raise ValueError(f"eta must be in (0, 1/2), got {self.eta}")

    @property
    def ell_N(self) -> float:
        return float(self.N) ** (-(0.5 + self.eta))

    @property
    def tau_N(self) -> float:
        return self.ell_N

    @property
    def r_N(self) -> float:
        return 1.0 - self.ell_N

    @property
    def sqrt_N(self) -> float:
        return math.sqrt(self.N)

    def integer_constraint(self, T0: float) -> int:
        """Return floor(T0 N^(1/2 - eta) / 2), required to be >= 1."""
        return math.floor(0.5 * T0 * float(self.N) ** (0.5 - self.eta))


@dataclass(frozen=True)
class SpaceTimePoint:
    """Rescaled space-time point (x, t) with x in R^2 and t > 0."""
    x: Tuple[float, float]
    t: float

    def __post_init__(self) -> None:
        if len(self.x) != DIMENSION:
            raise ValueError(f"Space coordinate must have {DIMENSION} entries")
        if self.t <= 0:
            raise ValueError(f"Time must be positive, got {self.t}")


@dataclass(frozen=True)
class QuadratureConfig:
    """
    Tolerances for all one-dimensional integrals.

    Attributes:
        epsabs: Absolute tolerance per segment
        epsrel: Relative tolerance per segment
        limit: Maximum QUADPACK subdivisions per segment
        r_max: Truncation point for the c1 integral
        failure_factor: Error above factor * tolerance is a failure
        spatial_nodes: Gauss-Hermite nodes per coordinate for mixtures
    """
    epsabs: float = 1e-11
    epsrel: float = 1e-9
    limit: int = 200
    r_max: float = 1e6
    failure_factor: float = 100.0
    spatial_nodes: int = 16

    def __post_init__(self) -> None:
        if self.epsabs <= 0 or self.epsrel <= 0:
            raise ValueError("Quadrature tolerances must be positive")
        if self.limit < 1:
            raise ValueError(f"Subdivision limit must be >= 1, got {self.limit}")
        if self.r_max < 1.0:
            raise ValueError(f"r_max must be >= 1, got {self.r_max}")
        if self.spatial_nodes < 2:
            raise ValueError("At least two spatial nodes are required")

    def tolerance_for(self, value: float) -> float:
        """Tolerance QUADPACK targets for an integral of the given size."""
        return max(self.epsabs, self.epsrel * abs(value))


@dataclass(frozen=True)
class QuadSegment:
    """One integrated segment of the audit trail."""
    lower: float
    upper: float
    value: float
    abserr: float
    neval: int
    transform: str = "identity"


@dataclass(frozen=True)
class QuadResult:
    """Integral value with its error estimate and per-segment audit trail."""
    label: str
    value: float
    abserr: float
    segments: Tuple[QuadSegment, ...] = ()

    def to_dict(self) -> dict:
        return {
            'label': self.label,
            'value': self.value,
            'abserr': self.abserr,
            'segments': [
                {
                    'lower': s.lower,
                    'upper': s.upper,
                    'value': s.value,
                    'abserr': s.abserr,
                    'neval': s.neval,
                    'transform': s.transform,
                }
                for s in self.segments
            ],
        }


@dataclass(frozen=True)
class CovarianceReport:
    """
    Rescaled covariance Cov[zeta^N(x,s); zeta^N(y,t)].

    interval_breakdown holds the (Poisson-left, normal-middle,
    Poisson-right) contributions; the right one is 0 when t - s > tau_N.
    """
    N: int
    raw_value: float
    recentered_value: float
    quadrature_error: float
    interval_breakdown: Tuple[float, float, float]
    no_limit: bool = False
    audit: Tuple[QuadResult, ...] = ()


@dataclass(frozen=True)
class HeatKernelQuery:
    """Arguments of Q_t(x, y) for two-dimensional Brownian motion."""
    time: float
    x: Tuple[float, float]
    y: Tuple[float, float]

    def __post_init__(self) -> None:
        if self.time <= 0:
            raise ValueError(f"Heat kernel time must be positive, got {self.time}")


@dataclass(frozen=True)
class MixtureTerm:
    """weight * g(width; x1 - c1) * g(width; x2 - c2)."""
    weight: float
    center: Tuple[float, float]
    width: float

    def __post_init__(self) -> None:
        if self.width <= 0:
            raise ValueError(f"Bump width must be positive, got {self.width}")
        if len(self.center) != DIMENSION:
            raise ValueError(f"Bump center must have {DIMENSION} entries")


@dataclass(frozen=True)
class GaussianMixture:
    """Finite signed combination of isotropic Gaussian bumps in the plane."""
    terms: Tuple[MixtureTerm, ...] = ()

    @property
    def total_mass(self) -> float:
        return math.fsum(term.weight for term in self.terms)

    def is_mass_zero(self, tolerance: float = 1e-14) -> bool:
        return abs(self.total_mass) <= tolerance

    def __len__(self) -> int:
        return len(self.terms)


@dataclass(frozen=True)
class HolderReport:
    """
    Hoelder-modulus decomposition E|zeta_s(phi) - zeta_t(phi)|^2 = I - J - K.
    """
    N: int
    s: float
    t: float
    I_N: float
    J_N: float
    K_N: float
    total: float
    ratio_half: float
    ratio_one_J: float
    ratio_one_K: float
    ratio_half_I: float
    quadrature_error: float
    polarization: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            'N': self.N,
            's': self.s,
            't': self.t,
            'I': self.I_N,
            'J': self.J_N,
            'K': self.K_N,
            'total': self.total,
            'ratio_half': self.ratio_half,
            'ratio_I_half': self.ratio_half_I,
            'ratio_J_one': self.ratio_one_J,
            'ratio_K_one': self.ratio_one_K,
            'quad_err': self.quadrature_error,
        }


@dataclass(frozen=True)
class ModulusRow:
    """One cell of the increment-metric modulus study."""
    m: DeathPair
    s: float
    t: float
    value: float
    ratio: float


@dataclass
class ParticleConfig:
    """
    Positions lambda(a) of the q-Whittaker particles on the truncated lattice.
    """
    L: int
    positions: Dict[LatticePoint, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.L < 3:
            raise ValueError(f"L must be >= 3, got {self.L}")

    @classmethod
    def zeros(cls, L: int) -> 'ParticleConfig':
        """Packed initial condition lambda == 0."""
        config = cls(L=L)
        for a2 in range(1, L + 1):
            for a1 in range(1, a2 + 1):
                config.positions[LatticePoint.of(a1, a2)] = 0
        return config

    def get(self, a1: int, a2: int) -> Optional[int]:
        """Position at (a1, a2), None outside the truncated lattice."""
        if a1 < 1 or a2 < a1 or a2 > self.L:
            return None
        return self.positions[LatticePoint.of(a1, a2)]

    def interlacing_violation(self) -> Optional[str]:
        """Describe the first violated inequality, or None."""
        for a2 in range(1, self.L + 1):
            for a1 in range(1, a2 + 1):
                here = self.positions.get(LatticePoint.of(a1, a2))
                if here is None:
                    return f"missing position at ({a1}, {a2})"
                below = self.get(a1, a2 - 1)
                if below is None:
                    continue
                if below > here:
                    return f"lambda({a1},{a2 - 1})={below} > lambda({a1},{a2})={here}"
                right = self.get(a1 + 1, a2)
                if right is not None and right > below:
                    return f"lambda({a1 + 1},{a2})={right} > lambda({a1},{a2 - 1})={below}"
        return None

    def copy(self) -> 'ParticleConfig':
        return ParticleConfig(L=self.L, positions=dict(self.positions))


@dataclass(frozen=True, eq=False)
class PathSample:
    """
    Sampled values of a lattice-indexed process.

    values has shape (n_samples, len(times), len(points)).
    """
    times: np.ndarray
    points: Tuple[LatticePoint, ...]
    values: np.ndarray

    def __post_init__(self) -> None:
        times = np.asarray(self.times, dtype=float)
        if times.ndim != 1 or len(times) == 0:
            raise ValueError("PathSample needs a non-empty one-dimensional time grid")
        if np.any(np.diff(times) <= 0):
            raise ValueError("PathSample times must be strictly increasing")
        expected = (len(times), len(self.points))
        if self.values.ndim != 3 or self.values.shape[1:] != expected:
            raise ValueError(
                f"PathSample values shape {self.values.shape} does not match "
                f"(samples, {expected[0]}, {expected[1]})"
            )

    @property
    def n_samples(self) -> int:
        return int(self.values.shape[0])

    def column(self, time_index: int, point_index: int) -> np.ndarray:
        """All samples of one (time, point) coordinate."""
        return self.values[:, time_index, point_index]

    def flattened(self) -> np.ndarray:
        """Samples as a (n_samples, n_times * n_points) matrix."""
        return self.values.reshape(self.n_samples, -1)


@dataclass(frozen=True, eq=False)
class DeathTrajectory:
    """Jump times and states of a pure death chain started at states[0]."""
    jump_times: np.ndarray
    states: np.ndarray
    horizon: float

    def state_at(self, t: float) -> int:
        index = int(np.searchsorted(self.jump_times, t, side='right'))
        return int(self.states[index])


@dataclass(frozen=True)
class LatticeTrajectory:
    """Jump trajectory of the pair chain mapped into the lattice."""
    jump_times: Tuple[float, ...]
    states: Tuple[LatticePoint, ...]
    horizon: float


@dataclass(frozen=True, eq=False)
class ParticleTrajectory:
    """
    Event log and snapshots of a q-Whittaker run.

    Attributes:
        points: Lattice order of the snapshot columns
        event_times: Time of each jump
        event_sites: Index (into points) of the particle that jumped
        event_pushes: Number of particles pushed along with it
        snapshot_times: Times at which positions were recorded
        snapshots: Positions, shape (len(snapshot_times), len(points))
        final: Configuration at the horizon
    """
    points: Tuple[LatticePoint, ...]
    event_times: np.ndarray
    event_sites: np.ndarray
    event_pushes: np.ndarray
    snapshot_times: np.ndarray
    snapshots: np.ndarray
    final: ParticleConfig

    @property
    def n_events(self) -> int:
        return int(len(self.event_times))


@dataclass(frozen=True)
class CovarianceEstimate:
    """Empirical covariance of two sample columns with jackknife error."""
    pair: Tuple[int, int]
    estimate: float
    stderr: float


@dataclass(frozen=True)
class RateEstimate:
    """Empirical jump rate out of a lattice state."""
    target: LatticePoint
    rate: float
    stderr: float
    jumps: int
    exposure: float


def lattice_size(L: int) -> int:
    """Number of points of the truncated lattice, L(L+1)/2."""
    return L * (L + 1) // 2


# Absolute tolerance of the exact algebraic identities
IDENTITY_TOLERANCE = 1e-13


@dataclass(frozen=True)
class IdentityCheck:
    """Both sides of one exact identity and the tolerance it must meet."""
    name: str
    lhs: float
    rhs: float
    tolerance: float = IDENTITY_TOLERANCE

    @property
    def residual(self) -> float:
        return abs(self.lhs - self.rhs)

    @property
    def passed(self) -> bool:
        return bool(self.residual <= self.tolerance)

    def to_dict(self) -> dict:
        return {
            'name': self.name,
            'lhs': self.lhs,
            'rhs': self.rhs,
            'residual': self.residual,
            'tolerance': self.tolerance,
            'passed': self.passed,
        }
