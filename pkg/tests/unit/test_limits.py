"""
Unit tests for the limit kernels and Gaussian-mixture test functions.
"""
import math

import pytest
from scipy import integrate, special

from whitlab.core.elements import HeatKernelQuery, QuadratureConfig
from whitlab.core.limits import (
    FOUR_PI,
    bump,
    bump_difference,
    combined,
    default_psi,
    evaluate,
    glue_identity_check,
    heat_flow,
    heat_kernel,
    heat_semigroup,
    kappa0_closed_form,
    kappa0_constant,
    kappa0_integral,
    limit_covariance_point,
    limit_covariance_result,
    recenter,
    scaled,
    smoothed_log_kernel,
    smoothed_log_kernel_exact,
    stationary_kernel,
    stationary_kernel_quadrature,
    stationary_weak_covariance,
    total_mass,
    weak_limit_covariance,
)

QUAD = QuadratureConfig()


def _direct_covariance(d: float, variance: float, noise_upper: float) -> float:
    """
    Limit covariance for two points (or two bumps) straight from its double
    integral: (1/2 pi) E[-ln|Z|] with Z ~ N((d, 0), variance I), integrated
    in polar coordinates, plus integral_0^noise_upper Q_{variance - 2r}(d) dr.
    """
    def log_part(theta: float, rho: float) -> float:
        if rho == 0.0:
            return 0.0
        dist_sq = rho * rho + d * d - 2.0 * rho * d * math.cos(theta)
        density = math.exp(-dist_sq / (2.0 * variance)) / (2.0 * math.pi * variance)
        return -math.log(rho) * density * rho

    def noise_part(r: float) -> float:
        u = variance - 2.0 * r
        if u <= 0.0:
            return 0.0
        return math.exp(-d * d / (2.0 * u)) / (2.0 * math.pi * u)

    reach = d + 12.0 * math.sqrt(variance)
    first, _ = integrate.dblquad(log_part, 0.0, reach, 0.0, 2.0 * math.pi, epsabs=1e-10, epsrel=1e-10)
    second, _ = integrate.quad(noise_part, 0.0, noise_upper, epsabs=1e-12, epsrel=1e-12)
    return first / (2.0 * math.pi) + second


class TestHeatKernel:
    """Test the planar heat semigroup."""

    def test_peak(self) -> None:
        """Test Q_t(x, x) = 1/(2 pi t)."""
        assert heat_kernel(2.0, 0.0) == pytest.approx(1.0 / (4.0 * math.pi))

    def test_zero_time(self) -> None:
        """Test the t -> 0 limit off the diagonal."""
        assert heat_kernel(0.0, 1.0) == 0.0

    def test_query(self) -> None:
        """Test Q_t(x, y) through a query record."""
        q = HeatKernelQuery(time=0.5, x=(0.0, 0.0), y=(1.0, 0.0))
        assert heat_semigroup(q) == pytest.approx(math.exp(-1.0) / math.pi)

    def test_query_rejects_nonpositive_time(self) -> None:
        """Test the query needs t > 0."""
        with pytest.raises(ValueError):
            HeatKernelQuery(time=0.0, x=(0.0, 0.0), y=(0.0, 0.0))

    @pytest.mark.parametrize("s,t,y", [(0.5, 1.0, (1.0, 0.5)), (2.0, 0.25, (0.0, 0.0)), (1.0, 3.0, (-2.0, 1.0))])
    def test_chapman_kolmogorov(self, s: float, t: float, y) -> None:
        """Test integral Q_s(x, z) Q_t(z, y) dz = Q_{s+t}(x, y) by 2D quadrature."""
        x = (0.25, -0.5)
        mid = ((x[0] + y[0]) / 2.0, (x[1] + y[1]) / 2.0)
        reach = 10.0 * math.sqrt(min(s, t)) + math.dist(x, y)

        def integrand(z2: float, z1: float) -> float:
            z = (z1, z2)
            return heat_semigroup(HeatKernelQuery(s, x, z)) * heat_semigroup(HeatKernelQuery(t, z, y))

        value, _ = integrate.dblquad(
            integrand, mid[0] - reach, mid[0] + reach, mid[1] - reach, mid[1] + reach,
            epsabs=1e-12, epsrel=1e-12,
        )
        assert value == pytest.approx(heat_semigroup(HeatKernelQuery(s + t, x, y)), abs=1e-9)


class TestKappa0:
    """Test the constant kappa_0."""

    def test_closed_form(self) -> None:
        """Test quadrature against (2 ln 2 - gamma)/(4 pi)."""
        assert kappa0_constant(QUAD) == pytest.approx(kappa0_closed_form(), abs=1e-8)

    def test_audit(self) -> None:
        """Test the integral is split at v = 1 and has a closed-form tail."""
        result = kappa0_integral(QUAD)
        assert result.label == "kappa0"
        assert any(s.upper == 1.0 for s in result.segments)
        assert any(s.transform == "log" for s in result.segments)


class TestGlueIdentity:
    """Test integral_0^T Q_2r dr against the log kernel."""

    @pytest.mark.parametrize("distance,T", [
        (1.0, 5.0),
        (0.25, 100.0),
        (2.0, 0.01),
        (7.5, 1.0),
    ])
    def test_identity(self, distance: float, T: float) -> None:
        """Test both sides agree."""
        report = glue_identity_check((0.0, 0.0), (distance, 0.0), T, QUAD)
        assert report.residual <= 1e-8

    def test_rejects_equal_points(self) -> None:
        """Test y1 = y2 is refused."""
        with pytest.raises(ValueError, match="y1 != y2"):
            glue_identity_check((1.0, 1.0), (1.0, 1.0), 1.0, QUAD)

    def test_rejects_nonpositive_horizon(self) -> None:
        """Test T > 0."""
        with pytest.raises(ValueError):
            glue_identity_check((0.0, 0.0), (1.0, 0.0), 0.0, QUAD)


class TestSmoothedLogKernel:
    """Test (1/2 pi) E[-ln|d + B_v|]."""

    @pytest.mark.parametrize("d,v", [(1.0, 0.5), (0.0, 3.0), (2.5, 0.1), (0.3, 10.0)])
    def test_against_closed_form(self, d: float, v: float) -> None:
        """Test quadrature against the exponential-integral form."""
        result = smoothed_log_kernel(d, v, QUAD)
        assert result.value == pytest.approx(smoothed_log_kernel_exact(d, v), abs=1e-8)

    def test_pure_log(self) -> None:
        """Test v = 0 gives -(1/2 pi) ln d."""
        assert smoothed_log_kernel_exact(2.0, 0.0) == pytest.approx(-math.log(2.0) / (2.0 * math.pi))

    def test_rejects_double_zero(self) -> None:
        """Test d = v = 0 is singular."""
        with pytest.raises(ValueError):
            smoothed_log_kernel(0.0, 0.0, QUAD)


class TestLimitCovariance:
    """Test the pointwise limit covariance."""

    def test_stationary_lag_form(self) -> None:
        """Test the value depends on (s, t) only through 1/s - 1/t."""
        x, y = (0.0, 0.0), (1.0, 1.0)
        value = limit_covariance_point(x, 1.0, y, 2.0, QUAD)
        assert value == pytest.approx(smoothed_log_kernel_exact(math.sqrt(2.0), 0.5), abs=1e-8)

    @pytest.mark.parametrize("x,s,y,t", [
        ((0.0, 0.0), 1.0, (1.0, 1.0), 2.0),
        ((0.5, -1.0), 0.5, (0.0, 0.0), 0.75),
        ((2.0, 0.0), 1.0, (-1.0, 3.0), 4.0),
        ((0.0, 0.0), 1.0, (0.1, 0.0), 1.1),
    ])
    def test_exponential_integral_form(self, x, s: float, y, t: float) -> None:
        """Test against -(ln d)/(2 pi) - E1(d^2 / (2 (1/s - 1/t))) / (4 pi)."""
        d = math.dist(x, y)
        lag = 1.0 / s - 1.0 / t
        expected = -math.log(d) / (2.0 * math.pi) - special.exp1(d * d / (2.0 * lag)) / (4.0 * math.pi)
        assert limit_covariance_point(x, s, y, t, QUAD) == pytest.approx(expected, abs=1e-8)

    def test_direct_double_integral(self) -> None:
        """Test s = t = 1, |x - y| = 1 against the double integral itself."""
        value = limit_covariance_point((0.0, 0.0), 1.0, (0.6, 0.8), 1.0, QUAD)
        assert value == pytest.approx(_direct_covariance(1.0, 2.0, 1.0), abs=1e-4)

    def test_translation_invariant(self) -> None:
        """Test the value depends on x and y only through x - y."""
        base = limit_covariance_point((0.0, 0.0), 1.0, (1.0, 0.5), 1.5, QUAD)
        shifted = limit_covariance_point((3.0, -2.0), 1.0, (4.0, -1.5), 1.5, QUAD)
        assert shifted == pytest.approx(base, abs=1e-10)

    def test_equal_times(self) -> None:
        """Test s = t reduces to the log kernel."""
        value = limit_covariance_point((0.0, 0.0), 1.5, (0.5, 0.0), 1.5, QUAD)
        assert value == pytest.approx(-math.log(0.5) / (2.0 * math.pi), abs=1e-8)

    def test_same_point(self) -> None:
        """Test x = y with s < t."""
        value = limit_covariance_point((0.3, 0.3), 1.0, (0.3, 0.3), 2.0, QUAD)
        expected = (0.5772156649015329 - math.log(1.0)) / FOUR_PI
        assert value == pytest.approx(expected, abs=1e-8)

    def test_no_limit(self) -> None:
        """Test s = t and x = y is refused."""
        with pytest.raises(ValueError, match="No limit"):
            limit_covariance_point((0.0, 0.0), 1.0, (0.0, 0.0), 1.0, QUAD)

    def test_rejects_reversed_times(self) -> None:
        """Test s > t is refused."""
        with pytest.raises(ValueError):
            limit_covariance_result((0.0, 0.0), 2.0, (1.0, 0.0), 1.0, QUAD)

    def test_audit_label(self) -> None:
        """Test the result carries its audit label."""
        result = limit_covariance_result((0.0, 0.0), 1.0, (1.0, 0.0), 2.0, QUAD)
        assert result.label == "limit_covariance"
        assert result.segments


class TestStationaryKernel:
    """Test kappa_0 - ln|x - y|/(2 pi)."""

    @pytest.mark.parametrize("distance", [0.1, 1.0, 10.0])
    def test_against_direct_quadrature(self, distance: float) -> None:
        """Test the closed form against the direct integral."""
        value = stationary_kernel((0.0, 0.0), (distance, 0.0), QUAD)
        direct = stationary_kernel_quadrature((0.0, 0.0), (distance, 0.0), QUAD)
        assert value == pytest.approx(direct.value, abs=1e-8)

    def test_singular(self) -> None:
        """Test x = y is refused."""
        with pytest.raises(ValueError, match="singular"):
            stationary_kernel((1.0, 0.0), (1.0, 0.0), QUAD)


class TestMixtures:
    """Test Gaussian-mixture algebra."""

    def test_bump_mass(self) -> None:
        """Test a bump has its weight as mass."""
        assert total_mass(bump(2.5, (1.0, 0.0), 0.3)) == 2.5

    def test_difference_has_zero_mass(self) -> None:
        """Test g(. - c1) - g(. - c2) integrates to zero."""
        phi = bump_difference((0.0, 0.0), (1.0, 0.0))
        assert phi.is_mass_zero()
        assert len(phi) == 2

    def test_combined_merges_terms(self) -> None:
        """Test equal bumps merge and cancel."""
        phi = bump(1.0, (0.0, 0.0), 1.0)
        assert len(combined(phi, phi)) == 1
        assert len(combined(phi, scaled(phi, -1.0))) == 0

    def test_heat_flow_widens(self) -> None:
        """Test Q_u adds u to every width."""
        flowed = heat_flow(bump(1.0, (0.0, 0.0), 0.5), 1.5)
        assert flowed.terms[0].width == 2.0

    @pytest.mark.parametrize("point", [(0.0, 0.0), (1.5, -0.5), (3.0, 2.0)])
    def test_heat_flow_against_quadrature(self, point) -> None:
        """Test (Q_u phi)(x) = integral Q_u(x, z) phi(z) dz by 2D quadrature."""
        phi = combined(bump(2.0, (1.0, 0.0), 0.5), bump(-0.5, (0.0, 1.0), 0.25))
        u = 0.75
        reach = 7.0

        def integrand(z2: float, z1: float) -> float:
            return heat_kernel(u, (point[0] - z1) ** 2 + (point[1] - z2) ** 2) * evaluate(phi, (z1, z2))

        direct, _ = integrate.dblquad(
            integrand, point[0] - reach, point[0] + reach, point[1] - reach, point[1] + reach,
            epsabs=1e-12, epsrel=1e-12,
        )
        assert evaluate(heat_flow(phi, u), point) == pytest.approx(direct, abs=1e-9)

    def test_heat_flow_semigroup(self) -> None:
        """Test Q_u Q_v phi = Q_{u+v} phi on a mixture."""
        phi = combined(bump(1.0, (0.0, 0.0), 0.5), bump(-1.0, (1.0, 1.0), 0.25))
        twice = heat_flow(heat_flow(phi, 0.25), 0.125)
        once = heat_flow(phi, 0.375)
        assert twice == once
        for point in ((0.0, 0.0), (0.5, 2.0)):
            assert evaluate(twice, point) == pytest.approx(evaluate(once, point), abs=1e-15)

    def test_heat_flow_rejects_negative(self) -> None:
        """Test u >= 0."""
        with pytest.raises(ValueError):
            heat_flow(default_psi(), -1.0)

    def test_evaluate(self) -> None:
        """Test phi(x) for one bump."""
        value = evaluate(bump(1.0, (0.0, 0.0), 1.0), (0.0, 0.0))
        assert value == pytest.approx(1.0 / (2.0 * math.pi))

    def test_recenter_removes_mass(self) -> None:
        """Test R phi has zero mass."""
        phi = combined(bump(3.0, (1.0, 2.0), 0.5), bump(-1.0, (0.0, 0.0), 2.0))
        assert recenter(phi, default_psi()).is_mass_zero()

    def test_recenter_idempotent(self) -> None:
        """Test R R phi = R phi."""
        phi = bump(2.0, (1.0, 1.0), 1.0)
        once = recenter(phi, default_psi())
        assert recenter(once, default_psi()) == once

    def test_recenter_rejects_bad_psi(self) -> None:
        """Test psi must have unit mass."""
        with pytest.raises(ValueError, match="mass 1"):
            recenter(default_psi(), bump(2.0, (0.0, 0.0), 1.0))


class TestWeakLimitCovariance:
    """Test the weak-form limit covariance."""

    def test_stationary_form(self) -> None:
        """Test mass-zero mixtures depend only on the lag 1/s - 1/t."""
        phi1 = bump_difference((0.0, 0.0), (1.0, 0.0))
        phi2 = bump_difference((0.0, 1.0), (1.0, 1.0))
        weak = weak_limit_covariance(phi1, phi2, 1.0, 2.0, QUAD)
        stationary = stationary_weak_covariance(phi1, phi2, 0.5, QUAD)
        assert weak == pytest.approx(stationary, abs=1e-8)

    def test_single_bumps(self) -> None:
        """Test one bump pair reduces to the smoothed log kernel at the lag."""
        phi1 = bump(1.0, (0.0, 0.0), 0.5)
        phi2 = bump(1.0, (2.0, 0.0), 0.25)
        weak = weak_limit_covariance(phi1, phi2, 1.0, 4.0, QUAD)
        assert weak == pytest.approx(smoothed_log_kernel_exact(2.0, 0.75 + 0.75), abs=1e-8)

    def test_bilinear(self) -> None:
        """Test scaling a test function scales the covariance."""
        phi1 = bump_difference((0.0, 0.0), (1.0, 0.0))
        phi2 = bump_difference((0.5, 0.5), (1.5, 0.5))
        base = weak_limit_covariance(phi1, phi2, 1.0, 1.5, QUAD)
        doubled = weak_limit_covariance(scaled(phi1, 2.0), phi2, 1.0, 1.5, QUAD)
        assert doubled == pytest.approx(2.0 * base, abs=1e-12)

    def test_direct_double_integral(self) -> None:
        """Test the pairwise reduction against the double integral of each bump pair."""
        phi1 = bump_difference((0.0, 0.0), (1.0, 0.0), 0.5)
        phi2 = bump(1.0, (0.5, 1.0), 0.25)
        s, t = 1.0, 2.0
        c = 1.0 / s + 1.0 / t
        direct = math.fsum(
            a.weight * b.weight * _direct_covariance(math.dist(a.center, b.center), a.width + b.width + c, 1.0 / t)
            for a in phi1.terms
            for b in phi2.terms
        )
        assert weak_limit_covariance(phi1, phi2, s, t, QUAD) == pytest.approx(direct, abs=1e-4)

    def test_equal_times_stationary(self) -> None:
        """Test equal-time covariances of re-centered mixtures do not depend on t."""
        psi = default_psi()
        phi1 = recenter(bump(1.0, (0.5, 0.0), 0.5), psi)
        phi2 = recenter(bump(2.0, (0.0, 1.0), 1.5), psi)
        values = [weak_limit_covariance(phi1, phi2, t, t, QUAD) for t in (0.5, 1.0, 2.0)]
        assert max(values) - min(values) <= 1e-6

    def test_variance_nonnegative(self) -> None:
        """Test phi1 = phi2 at s = t gives a variance."""
        phi = bump_difference((0.0, 0.0), (1.0, 0.5))
        assert weak_limit_covariance(phi, phi, 1.0, 1.0, QUAD) >= 0.0

    def test_rejects_negative_lag(self) -> None:
        """Test lag >= 0."""
        with pytest.raises(ValueError):
            stationary_weak_covariance(default_psi(), default_psi(), -0.1, QUAD)
