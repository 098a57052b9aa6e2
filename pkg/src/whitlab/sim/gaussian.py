"""
Samplers of the Whittaker Gaussian process.

simulate_whittaker_gaussian draws exact joint samples of zeta_t(a) from
the covariance engine. simulate_whittaker_euler integrates the SDE in log
time u = ln t, where it is the linear equation
dY = A_L Y du + e^{u/2} dW; every step is exact, with noise covariance
e^{u+delta} (K - e^{delta B} K e^{delta B^T}), B = A_L - I/2 and K the
solution of B K + K B^T = -I.
"""
import math
from typing import Dict, List, Sequence, Tuple

import numpy as np
import structlog
from scipy import linalg

from whitlab.core.covariance import covariance_exact
from whitlab.core.elements import (
    EIGEN_CLIP_RELATIVE,
    CovarianceEstimate,
    LatticePoint,
    PathSample,
    QuadratureConfig,
    lattice_size,
)
from whitlab.core.lattice import delta_map, generator, lattice_points, whittaker_mean
from whitlab.errors import FactorizationError
from whitlab.sim.rng import RngStream

logger = structlog.get_logger(__name__)


def symmetric_factor(cov: np.ndarray, label: str = "covariance") -> np.ndarray:
    """
    F with F F^T = cov, from the eigendecomposition.

    Eigenvalues down to -EIGEN_CLIP_RELATIVE * trace are clipped to 0.

    Raises:
        FactorizationError: If a lower eigenvalue is found
    """
    cov = 0.5 * (cov + cov.T)
    values, vectors = np.linalg.eigh(cov)
    threshold = -EIGEN_CLIP_RELATIVE * max(float(np.trace(cov)), 0.0)
    smallest = float(values.min()) if values.size else 0.0
    if smallest < threshold:
        logger.error("Covariance is not positive semidefinite", label=label, min_eigenvalue=smallest)
        raise FactorizationError(min_eigenvalue=smallest, threshold=threshold)
    if smallest < 0:
        logger.debug("Negative eigenvalues clipped", label=label, min_eigenvalue=smallest)
    return vectors * np.sqrt(np.clip(values, 0.0, None))


def _grid(pairs: Sequence[Tuple[LatticePoint, float]]) -> Tuple[np.ndarray, Tuple[LatticePoint, ...]]:
    if not pairs:
        raise ValueError("At least one (point, time) pair is required")
    times = np.array(sorted({float(t) for _, t in pairs}))
    if times[0] <= 0:
        raise ValueError(f"Sampling times must be positive, got {times[0]}")
    points = tuple(sorted({a for a, _ in pairs}, key=lambda a: a.sort_key))
    return times, points


def whittaker_covariance_matrix(
    times: Sequence[float],
    points: Sequence[LatticePoint],
    quad: QuadratureConfig = QuadratureConfig()
) -> np.ndarray:
    """
    Covariance of zeta over the grid times x points, time-major.

    Entry ((i, a), (j, b)) is covariance_exact at the death pairs of a, b.
    """
    cells = [(float(t), a) for t in times for a in points]
    size = len(cells)
    cov = np.zeros((size, size))
    for i, (s, a) in enumerate(cells):
        for j in range(i, size):
            t, b = cells[j]
            if s <= t:
                value = covariance_exact(delta_map(a), delta_map(b), s, t, quad)
            else:
                value = covariance_exact(delta_map(b), delta_map(a), t, s, quad)
            cov[i, j] = cov[j, i] = value
    return cov


def simulate_whittaker_gaussian(
    pairs: Sequence[Tuple[LatticePoint, float]],
    n_samples: int,
    rng: RngStream,
    quad: QuadratureConfig = QuadratureConfig()
) -> PathSample:
    """
    Exact joint samples of zeta_t(a).

    The process is sampled on the product grid of the distinct times and
    points of pairs.

    Args:
        pairs: (lattice point, time) pairs, times > 0
        n_samples: Number of independent samples
        rng: Random stream
        quad: Tolerances of the covariance integrals

    Raises:
        FactorizationError: If the covariance matrix is far from PSD
    """
    times, points = _grid(pairs)
    cov = whittaker_covariance_matrix(times, points, quad)
    factor = symmetric_factor(cov, "whittaker_gaussian")
    normals = rng.generator().standard_normal((n_samples, factor.shape[1]))
    values = (normals @ factor.T).reshape(n_samples, len(times), len(points))
    logger.info("Gaussian samples drawn", samples=n_samples, times=len(times), points=len(points))
    return PathSample(times=times, points=points, values=values)


class LogTimeStepper:
    """
    Exact stepping of dY = A_L Y du + e^{u/2} dW.

    Transition matrices and noise factors are cached per step size.
    """

    def __init__(self, L: int) -> None:
        self.L = L
        self.A = np.array(generator(L).entries)
        size = lattice_size(L)
        self.B = self.A - 0.5 * np.eye(size)
        self.K = linalg.solve_continuous_lyapunov(self.B, -np.eye(size))
        self.K_factor = symmetric_factor(self.K, "stationary")
        self._cache: Dict[float, Tuple[np.ndarray, np.ndarray]] = {}

    def step_operators(self, delta: float) -> Tuple[np.ndarray, np.ndarray]:
        """(e^{delta A}, factor of K - e^{delta B} K e^{delta B^T})."""
        key = round(delta, 15)
        if key not in self._cache:
            transition = linalg.expm(delta * self.A)
            decay = linalg.expm(delta * self.B)
            noise = self.K - decay @ self.K @ decay.T
            self._cache[key] = (transition, symmetric_factor(noise, "step"))
        return self._cache[key]

    def initial(self, xi0: np.ndarray, t0: float, normals: np.ndarray) -> np.ndarray:
        """Y at u0 = ln t0: mean e^{u0 A} xi0 plus N(0, t0 K)."""
        mean = whittaker_mean(self.L, xi0, t0)
        return mean + math.sqrt(t0) * normals @ self.K_factor.T

    def advance(self, Y: np.ndarray, u: float, delta: float, normals: np.ndarray) -> np.ndarray:
        transition, factor = self.step_operators(delta)
        return Y @ transition.T + math.exp(0.5 * (u + delta)) * normals @ factor.T


def simulate_whittaker_euler(
    L: int,
    xi0: Sequence[float],
    times: Sequence[float],
    n_paths: int,
    rng: RngStream
) -> PathSample:
    """
    Paths of xi_t on the truncated lattice at the given times.

    Args:
        L: Truncation level
        xi0: Initial vector in lattice order; zero gives zeta
        times: Strictly increasing positive times
        n_paths: Number of independent paths
        rng: Random stream

    Returns:
        PathSample over times x lattice_points(L)
    """
    grid = np.asarray(times, dtype=float)
    if grid.ndim != 1 or len(grid) == 0 or grid[0] <= 0:
        raise ValueError("Times must be a non-empty grid of positive values")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("Times must be strictly increasing")
    xi = np.asarray(xi0, dtype=float)
    size = lattice_size(L)
    if xi.shape != (size,):
        raise ValueError(f"xi0 must have {size} entries, got {xi.shape}")

    stepper = LogTimeStepper(L)
    gen = rng.generator()
    values = np.empty((n_paths, len(grid), size))
    Y = stepper.initial(xi, grid[0], gen.standard_normal((n_paths, size)))
    values[:, 0] = Y
    logs = np.log(grid)
    for k in range(1, len(grid)):
        Y = stepper.advance(Y, logs[k - 1], logs[k] - logs[k - 1], gen.standard_normal((n_paths, size)))
        values[:, k] = Y
    logger.info("Log-time paths simulated", L=L, paths=n_paths, steps=len(grid))
    return PathSample(times=grid, points=lattice_points(L), values=values)


def empirical_covariance(
    samples: np.ndarray,
    pairs: Sequence[Tuple[int, int]]
) -> List[CovarianceEstimate]:
    """
    Unbiased covariances of sample columns with jackknife standard errors.

    Leave-one-out sums use S_{-i} = S - n/(n-1) (x_i - xbar)(y_i - ybar).
    With fewer than three samples the standard error is NaN.

    Args:
        samples: (n_samples, n_columns) matrix
        pairs: Column index pairs
    """
    X = np.asarray(samples, dtype=float)
    n = X.shape[0]
    if n < 2:
        raise ValueError(f"Need at least 2 samples, got {n}")
    centred = X - X.mean(axis=0)
    estimates = []
    for i, j in pairs:
        products = centred[:, i] * centred[:, j]
        S = math.fsum(products.tolist())
        estimate = S / (n - 1)
        if n < 3:
            stderr = math.nan
        else:
            leave_out = (S - n / (n - 1) * products) / (n - 2)
            stderr = math.sqrt((n - 1) / n * float(np.sum((leave_out - leave_out.mean()) ** 2)))
        estimates.append(CovarianceEstimate(pair=(int(i), int(j)), estimate=estimate, stderr=stderr))
    return estimates
