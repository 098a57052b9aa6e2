"""
Exact-identity suites.

Each suite checks one family of identities on a fixed grid or on
randomized instances drawn from a seeded stream, and reports the number
of checks, the largest residual and every failure. A fault can be
injected into one suite to confirm that failures surface.
"""
import dataclasses
import math
from typing import Callable, Dict, Iterable, List, Optional, Sequence

import numpy as np
import structlog

from whitlab.core.approx import skellam_match, skellam_series, stein_chen_bound, tv_binom_poisson
from whitlab.core.binomial import (
    binom_pmf,
    complement_identity_check,
    pmf_time_derivative,
    shift_identities_check,
)
from whitlab.core.checks import CheckResult
from whitlab.core.covariance import lattice_shift_check
from whitlab.core.elements import (
    BinomialSpec,
    DeathPair,
    IdentityCheck,
    PoissonPair,
    QuadratureConfig,
)
from whitlab.core.lattice import (
    delta_map,
    lattice_points,
    semigroup_dense,
    semigroup_product_matrix,
    sigma_map,
)
from whitlab.core.limits import (
    glue_identity_check,
    kappa0_closed_form,
    kappa0_integral,
    stationary_kernel,
    stationary_kernel_quadrature,
)
from whitlab.sim.rng import RngStream

logger = structlog.get_logger(__name__)

SUITES = (
    "semigroup",
    "sigma_delta",
    "complement",
    "shift",
    "derivative",
    "lattice_shift",
    "skellam",
    "stein_chen",
    "glue",
    "stationary",
)

SEMIGROUP_TOLERANCE = 1e-10
ROW_SUM_TOLERANCE = 1e-12
DERIVATIVE_STEP = 1e-6
DERIVATIVE_TOLERANCE = 1e-6
SKELLAM_TOLERANCE = 1e-12
GLUE_TOLERANCE = 1e-8
STATIONARY_TOLERANCE = 1e-8
MAX_TRIALS = 30


class IdentityValidator:
    """
    Runs the identity suites.

    Args:
        seed: Seed of the randomized instances
        instances: Randomized instances per suite
        quad: Tolerances of the quadrature-based suites
        fault: Name of a suite whose left-hand sides are corrupted
    """

    def __init__(
        self,
        seed: int = 20240917,
        instances: int = 1000,
        quad: QuadratureConfig = QuadratureConfig(),
        fault: Optional[str] = None
    ) -> None:
        if fault is not None and fault not in SUITES:
            raise ValueError(f"Unknown suite for fault injection: {fault}")
        self.seed = seed
        self.instances = instances
        self.quad = quad
        self.fault = fault
        self._suites: Dict[str, Callable[[np.random.Generator], Iterable[IdentityCheck]]] = {
            "semigroup": self._semigroup,
            "sigma_delta": self._sigma_delta,
            "complement": self._complement,
            "shift": self._shift,
            "derivative": self._derivative,
            "lattice_shift": self._lattice_shift,
            "skellam": self._skellam,
            "stein_chen": self._stein_chen,
            "glue": self._glue,
            "stationary": self._stationary,
        }

    def run(self, only: Optional[Sequence[str]] = None) -> CheckResult:
        """
        Run every suite, or only the named ones.

        Raises:
            ValueError: For an unknown suite name
        """
        names = list(only) if only else list(SUITES)
        unknown = [n for n in names if n not in self._suites]
        if unknown:
            raise ValueError(f"Unknown identity suites: {', '.join(unknown)}")

        result = CheckResult()
        for index, name in enumerate(names):
            rng = RngStream(self.seed, index).generator()
            self._tally(result, name, self._suites[name](rng))
        logger.info("Identity suites finished", suites=names, valid=result.valid, failures=len(result.errors))
        return result

    def _tally(self, result: CheckResult, suite: str, checks: Iterable[IdentityCheck]) -> None:
        count, failures, worst = 0, 0, 0.0
        for check in checks:
            if suite == self.fault:
                check = dataclasses.replace(check, lhs=-(check.lhs + 1.0))
            count += 1
            worst = max(worst, check.residual)
            if not result.record(check, suite):
                failures += 1
        result.info[suite] = {'checks': count, 'failures': failures, 'max_residual': worst}
        logger.debug("Suite finished", suite=suite, checks=count, failures=failures, max_residual=worst)

    # Suites

    def _semigroup(self, rng: np.random.Generator) -> Iterable[IdentityCheck]:
        for L in range(3, 9):
            for t in (0.1, 1.0, 5.0):
                dense = semigroup_dense(L, t)
                product = semigroup_product_matrix(L, t)
                yield IdentityCheck(
                    name=f"dense_vs_product[L={L},t={t}]",
                    lhs=float(np.abs(dense - product).max()),
                    rhs=0.0,
                    tolerance=SEMIGROUP_TOLERANCE,
                )
                yield IdentityCheck(
                    name=f"row_sums[L={L},t={t}]",
                    lhs=float(np.abs(dense.sum(axis=1) - 1.0).max()),
                    rhs=0.0,
                    tolerance=ROW_SUM_TOLERANCE,
                )
        for L in range(3, 7):
            s, t = 0.3, 0.9
            composed = semigroup_dense(L, s) @ semigroup_dense(L, t)
            yield IdentityCheck(
                name=f"chapman_kolmogorov[L={L}]",
                lhs=float(np.abs(composed - semigroup_dense(L, s + t)).max()),
                rhs=0.0,
                tolerance=SEMIGROUP_TOLERANCE,
            )

    def _sigma_delta(self, rng: np.random.Generator) -> Iterable[IdentityCheck]:
        for m1, m2 in rng.integers(0, 10_000, size=(self.instances, 2)):
            m = DeathPair(int(m1), int(m2))
            back = delta_map(sigma_map(m))
            yield IdentityCheck(name=f"delta_sigma{m.as_tuple()}", lhs=float(back != m), rhs=0.0, tolerance=0.0)
        for a in lattice_points(12):
            again = sigma_map(delta_map(a))
            yield IdentityCheck(name=f"sigma_delta{a!r}", lhs=float(again != a), rhs=0.0, tolerance=0.0)

    def _complement(self, rng: np.random.Generator) -> Iterable[IdentityCheck]:
        for _ in range(self.instances):
            m1, m2 = (int(v) for v in rng.integers(0, MAX_TRIALS + 1, size=2))
            p1, p2 = (float(v) for v in rng.uniform(0.0, 1.0, size=2))
            shift = int(rng.integers(-MAX_TRIALS, MAX_TRIALS + 1))
            yield complement_identity_check(BinomialSpec(m1, p1), BinomialSpec(m2, p2), shift)

    def _shift(self, rng: np.random.Generator) -> Iterable[IdentityCheck]:
        for _ in range(self.instances):
            m = int(rng.integers(0, MAX_TRIALS + 1))
            p = float(rng.uniform(0.05, 1.0))
            table = rng.uniform(-1.0, 1.0, size=m + 3)
            yield from shift_identities_check(lambda n, table=table: table[n], m, p)

    def _derivative(self, rng: np.random.Generator) -> Iterable[IdentityCheck]:
        h = DERIVATIVE_STEP
        for _ in range(self.instances):
            m = int(rng.integers(0, MAX_TRIALS + 1))
            n = int(rng.integers(0, m + 1))
            a = float(rng.uniform(0.5, 2.0))
            r = float(rng.uniform(0.05, 0.95)) * a
            upper = binom_pmf(BinomialSpec(m, r / (a + h)), n)
            lower = binom_pmf(BinomialSpec(m, r / (a - h)), n)
            yield IdentityCheck(
                name=f"pmf_time_derivative[m={m},n={n}]",
                lhs=pmf_time_derivative(m, r, a, n),
                rhs=(upper - lower) / (2.0 * h),
                tolerance=DERIVATIVE_TOLERANCE,
            )

    def _lattice_shift(self, rng: np.random.Generator) -> Iterable[IdentityCheck]:
        for _ in range(self.instances):
            N = int(rng.integers(16, 1 << 16))
            a = float(rng.uniform(0.25, 4.0))
            x = float(rng.uniform(-0.5, 0.5)) * math.sqrt(N)
            ell = int(rng.integers(0, 50))
            yield lattice_shift_check(x, a, ell, N)

    def _skellam(self, rng: np.random.Generator) -> Iterable[IdentityCheck]:
        means = (0.5, 2.0, 10.0, 100.0, 1000.0)
        for lam in means:
            for lam_prime in means:
                pair = PoissonPair(lam, lam_prime)
                for k in (-100, -17, -3, 0, 1, 5, 40, 100):
                    yield IdentityCheck(
                        name=f"skellam[{lam},{lam_prime},{k}]",
                        lhs=skellam_match(pair, k),
                        rhs=skellam_series(pair, k),
                        tolerance=SKELLAM_TOLERANCE,
                    )

    def _stein_chen(self, rng: np.random.Generator) -> Iterable[IdentityCheck]:
        ms = np.unique(np.geomspace(2, 10_000, 50).astype(int))
        ps = np.linspace(0.01, 0.5, 50)
        for m in ms:
            for p in ps:
                tv = tv_binom_poisson(int(m), float(p))
                bound = stein_chen_bound(int(m), float(p))
                # one-sided: only an excess over the bound is a residual
                yield IdentityCheck(
                    name=f"stein_chen[m={m},p={p:.4f}]",
                    lhs=max(tv, bound),
                    rhs=bound,
                    tolerance=0.0,
                )

    def _glue(self, rng: np.random.Generator) -> Iterable[IdentityCheck]:
        for distance in (0.25, 1.0, 2.0, 7.5):
            for T in (0.01, 1.0, 5.0, 100.0, 1e4):
                report = glue_identity_check((0.0, 0.0), (distance, 0.0), T, self.quad)
                yield IdentityCheck(
                    name=f"glue[d={distance},T={T}]",
                    lhs=report.lhs,
                    rhs=report.rhs,
                    tolerance=GLUE_TOLERANCE,
                )

    def _stationary(self, rng: np.random.Generator) -> Iterable[IdentityCheck]:
        kappa = kappa0_integral(self.quad).value
        yield IdentityCheck(
            name="kappa0_closed_form",
            lhs=kappa,
            rhs=kappa0_closed_form(),
            tolerance=STATIONARY_TOLERANCE,
        )
        for distance in (0.1, 1.0, 10.0):
            y = (distance, 0.0)
            value = stationary_kernel((0.0, 0.0), y, self.quad)
            yield IdentityCheck(
                name=f"log_offset[d={distance}]",
                lhs=value + math.log(distance) / (2.0 * math.pi),
                rhs=kappa,
                tolerance=STATIONARY_TOLERANCE,
            )
            yield IdentityCheck(
                name=f"direct_quadrature[d={distance}]",
                lhs=value,
                rhs=stationary_kernel_quadrature((0.0, 0.0), y, self.quad).value,
                tolerance=STATIONARY_TOLERANCE,
            )


def available_suites() -> List[str]:
    return list(SUITES)
