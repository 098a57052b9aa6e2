"""
Unit tests for Poisson and normal approximations.
"""
import math

import numpy as np
import pytest

from whitlab.core.approx import (
    binom_lclt_approx,
    binom_lclt_sup_error,
    gaussian_density,
    heat_kernel_lipschitz,
    poisson_lclt_error,
    poisson_pmf,
    skellam_match,
    skellam_series,
    skellam_window,
    stein_chen_bound,
    tv_binom_poisson,
)
from whitlab.core.elements import (
    HEAT_KERNEL_CALIBRATION_GRID,
    HEAT_KERNEL_LIPSCHITZ_C,
    LcltParams,
    PoissonPair,
)
from whitlab.sim.rng import RngStream


class TestGaussianDensity:
    """Test the one-dimensional Gaussian density."""

    def test_peak(self) -> None:
        """Test g(1; 0) = 1/sqrt(2 pi)."""
        assert gaussian_density(1.0, 0.0) == pytest.approx(1.0 / math.sqrt(2 * math.pi))

    def test_variance_scaling(self) -> None:
        """Test g(s; x) = g(1; x/sqrt(s))/sqrt(s)."""
        s, x = 4.0, 1.3
        assert gaussian_density(s, x) == pytest.approx(gaussian_density(1.0, x / 2.0) / 2.0)


class TestPoissonPmf:
    """Test the Poisson pmf."""

    def test_sums_to_one(self) -> None:
        """Test normalisation for a moderate mean."""
        total = math.fsum(poisson_pmf(7.5, k) for k in range(200))
        assert total == pytest.approx(1.0, abs=1e-14)

    def test_zero_mean(self) -> None:
        """Test V(0) = 0 almost surely."""
        assert poisson_pmf(0.0, 0) == 1.0
        assert poisson_pmf(0.0, 3) == 0.0


class TestSkellam:
    """Test P(V(lam) = V'(lam') + k)."""

    @pytest.mark.parametrize("lam,lam_prime,k", [
        (0.5, 3.0, 2),
        (100.0, 80.0, 5),
        (1000.0, 1000.0, 0),
        (2.0, 10.0, -17),
    ])
    def test_bessel_matches_series(self, lam: float, lam_prime: float, k: int) -> None:
        """Test the Bessel form against the direct series."""
        pair = PoissonPair(lam, lam_prime)
        assert skellam_match(pair, k) == pytest.approx(skellam_series(pair, k), abs=1e-12)

    def test_reflection(self) -> None:
        """Test swapping the means reflects the shift."""
        a = skellam_match(PoissonPair(3.0, 7.0), 4)
        b = skellam_match(PoissonPair(7.0, 3.0), -4)
        assert a == pytest.approx(b, rel=1e-14)

    def test_sums_to_one(self) -> None:
        """Test the shift law is normalised over its window."""
        pair = PoissonPair(40.0, 25.0)
        lo, hi = skellam_window(pair)
        total = math.fsum(skellam_match(pair, k) for k in range(lo, hi + 1))
        assert total == pytest.approx(1.0, abs=1e-13)

    def test_large_arguments(self) -> None:
        """Test no overflow for 2 sqrt(lam lam') of order 1e5."""
        value = skellam_match(PoissonPair(5e4, 5e4), 0)
        assert math.isfinite(value)
        assert value == pytest.approx(1.0 / math.sqrt(2 * math.pi * 1e5), rel=1e-4)

    def test_window_contains_mean(self) -> None:
        """Test the window is centred on lam - lam'."""
        lo, hi = skellam_window(PoissonPair(50.0, 10.0))
        assert lo < 40 < hi


class TestSteinChen:
    """Test the binomial-to-Poisson total-variation bound."""

    @pytest.mark.parametrize("m,p", [(2, 0.5), (10, 0.1), (100, 0.3), (5000, 0.01)])
    def test_bound_holds(self, m: int, p: float) -> None:
        """Test d_TV <= (1 - e^-mp) p."""
        assert tv_binom_poisson(m, p) <= stein_chen_bound(m, p)

    def test_zero_cases(self) -> None:
        """Test degenerate laws coincide."""
        assert tv_binom_poisson(0, 0.4) == 0.0
        assert tv_binom_poisson(10, 0.0) == 0.0

    def test_rejects_bad_arguments(self) -> None:
        """Test m >= 1 and 0 < p < 1 are required."""
        with pytest.raises(ValueError, match="m >= 1"):
            stein_chen_bound(0, 0.5)
        with pytest.raises(ValueError, match="0 < p < 1"):
            stein_chen_bound(5, 1.0)


class TestPoissonLclt:
    """Test the Poisson local CLT error."""

    def test_scaled_error_bounded(self) -> None:
        """Test sup error times 2 lam stays below the value at the smallest mean."""
        errors = [poisson_lclt_error(PoissonPair(lam, lam)) for lam in (10.0, 100.0, 1000.0)]
        first = errors[0].scaled
        assert first > 0.0
        for error in errors:
            assert error.scaled <= 2.0 * first
            assert error.sup_error <= 1.0 / (2.0 * 10.0)

    def test_rejects_zero_mean(self) -> None:
        """Test both means must be positive."""
        with pytest.raises(ValueError):
            poisson_lclt_error(PoissonPair(0.0, 1.0))


class TestBinomialLclt:
    """Test the binomial local CLT approximation."""

    def test_error_within_budget(self) -> None:
        """Test the sup error is of the order of 1/(sqrt(N) sigma^2)."""
        N = 1024
        params = LcltParams(M=N // 2, M_prime=N // 2, q=0.3, q_prime=0.6, N=N)
        result = binom_lclt_sup_error(params, half_window=40)
        assert result.scaled < 1.0

    def test_budget(self) -> None:
        """Test the reported budget."""
        params = LcltParams(M=400, M_prime=300, q=0.5, q_prime=0.5, N=400)
        approx = binom_lclt_approx(params, 0)
        assert approx.error_budget == pytest.approx(1.0 / (20.0 * params.sigma_sq))

    def test_rejects_degenerate_variance(self) -> None:
        """Test sigma^2 = 0 is refused."""
        params = LcltParams(M=10, M_prime=10, q=0.0, q_prime=1.0, N=16)
        with pytest.raises(ValueError, match="sigma"):
            binom_lclt_approx(params, 0)


class TestHeatKernelLipschitz:
    """Test the Gaussian density comparison."""

    def test_holds_on_calibration_grid(self) -> None:
        """Test the constant on random draws from the calibration ranges."""
        gen = RngStream(7).generator()
        a_lo, a_hi = HEAT_KERNEL_CALIBRATION_GRID['a_range']
        x_lo, x_hi = HEAT_KERNEL_CALIBRATION_GRID['x_range']
        logs = gen.uniform(math.log(a_lo), math.log(a_hi), size=(2000, 2))
        xs = gen.uniform(x_lo, x_hi, size=(2000, 2))
        for (la, lb), (x, y) in zip(logs, xs):
            a, b = sorted((math.exp(la), math.exp(lb)))
            check = heat_kernel_lipschitz(a, b, float(x), float(y))
            assert check.holds
            assert check.difference <= HEAT_KERNEL_LIPSCHITZ_C * check.bound

    def test_equal_arguments(self) -> None:
        """Test identical arguments give zero on both sides."""
        check = heat_kernel_lipschitz(2.0, 2.0, 0.5, 0.5)
        assert check.bound == 0.0
        assert check.difference == 0.0
        assert check.holds

    def test_rejects_unordered(self) -> None:
        """Test 0 < a <= b is required."""
        with pytest.raises(ValueError):
            heat_kernel_lipschitz(2.0, 1.0, 0.0, 0.0)

    def test_grid_ranges(self) -> None:
        """Test the calibration grid is the documented one."""
        assert HEAT_KERNEL_CALIBRATION_GRID['points'] == 100 * 100
        assert np.isclose(HEAT_KERNEL_CALIBRATION_GRID['a_range'][1], 1e3)
