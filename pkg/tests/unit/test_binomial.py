"""
Unit tests for binomial probabilities and matching probabilities.
"""
import math

import numpy as np
import pytest

from whitlab.core.binomial import (
    binom_logpmf,
    binom_pmf,
    binom_pmf_vector,
    complement_identity_check,
    match_prob,
    match_prob_full,
    match_prob_matrix,
    pmf_time_derivative,
    shift_identities_check,
    tail_certificate,
    window_half_width,
)
from whitlab.core.elements import MATCH_TAIL_TARGET, BinomialSpec


class TestBinomialSpec:
    """Test binomial law parameters."""

    def test_moments(self) -> None:
        """Test mean and variance."""
        spec = BinomialSpec(20, 0.25)
        assert spec.mean == 5.0
        assert spec.variance == pytest.approx(3.75)

    def test_rejects_negative_trials(self) -> None:
        """Test m must be >= 0."""
        with pytest.raises(ValueError, match="Trial count"):
            BinomialSpec(-1, 0.5)

    def test_rejects_bad_probability(self) -> None:
        """Test p must be in [0, 1]."""
        with pytest.raises(ValueError, match="Success probability"):
            BinomialSpec(3, 1.5)


class TestBinomPmf:
    """Test the binomial pmf."""

    def test_sums_to_one(self) -> None:
        """Test the pmf is normalised."""
        spec = BinomialSpec(30, 0.3)
        total = math.fsum(binom_pmf(spec, k) for k in range(31))
        assert total == pytest.approx(1.0, abs=1e-14)

    def test_outside_support(self) -> None:
        """Test values outside 0..m have probability 0."""
        spec = BinomialSpec(5, 0.5)
        assert binom_pmf(spec, -1) == 0.0
        assert binom_pmf(spec, 6) == 0.0

    def test_point_masses(self) -> None:
        """Test p = 0 and p = 1."""
        assert binom_pmf(BinomialSpec(7, 0.0), 0) == 1.0
        assert binom_pmf(BinomialSpec(7, 0.0), 1) == 0.0
        assert binom_pmf(BinomialSpec(7, 1.0), 7) == 1.0
        assert binom_pmf(BinomialSpec(7, 1.0), 6) == 0.0

    def test_logpmf(self) -> None:
        """Test log pmf matches the pmf."""
        spec = BinomialSpec(12, 0.4)
        for k in range(13):
            assert binom_logpmf(spec, k) == pytest.approx(math.log(binom_pmf(spec, k)), rel=1e-12)

    def test_vector(self) -> None:
        """Test the vectorized pmf matches the scalar one."""
        spec = BinomialSpec(9, 0.65)
        ks = np.arange(-2, 12)
        values = binom_pmf_vector(spec, ks)
        for k, v in zip(ks, values):
            assert v == pytest.approx(binom_pmf(spec, int(k)), rel=1e-13, abs=1e-300)

    def test_vector_point_mass(self) -> None:
        """Test the vectorized pmf at p = 0."""
        values = binom_pmf_vector(BinomialSpec(4, 0.0), np.arange(5))
        assert values.tolist() == [1.0, 0.0, 0.0, 0.0, 0.0]


class TestTailCertificate:
    """Test the Bernstein tail bound."""

    def test_bounded_by_one(self) -> None:
        """Test the certificate never exceeds 1."""
        spec = BinomialSpec(100, 0.5)
        assert tail_certificate(spec, 0.5) <= 1.0
        assert tail_certificate(spec, 0.0) == 1.0

    def test_decreasing(self) -> None:
        """Test wider windows give smaller bounds."""
        spec = BinomialSpec(1000, 0.3)
        widths = [10.0, 30.0, 60.0, 120.0]
        bounds = [tail_certificate(spec, d) for d in widths]
        assert bounds == sorted(bounds, reverse=True)

    def test_matching_window_is_certified(self) -> None:
        """Test the matching window leaves negligible tail mass."""
        for m, p in ((10, 0.5), (1000, 0.01), (100_000, 0.7)):
            spec = BinomialSpec(m, p)
            assert tail_certificate(spec, window_half_width(spec)) < 1e-15

    def test_narrow_window_is_widened(self, monkeypatch) -> None:
        """Test a too narrow starting window grows until the tail target holds."""
        monkeypatch.setattr("whitlab.core.binomial.MATCH_WINDOW_SIGMAS", 1.0)
        monkeypatch.setattr("whitlab.core.binomial.MATCH_WINDOW_PAD", 0)
        spec = BinomialSpec(400, 0.3)
        h = window_half_width(spec)
        assert h > math.sqrt(spec.variance)
        assert tail_certificate(spec, h) <= MATCH_TAIL_TARGET

        other = BinomialSpec(380, 0.33)
        assert match_prob(spec, other, 2) == pytest.approx(match_prob_full(spec, other, 2), abs=1e-15)


class TestMatchProb:
    """Test matching probabilities."""

    def test_against_full_sum(self) -> None:
        """Test the windowed sum agrees with the full sum."""
        s1 = BinomialSpec(30, 0.3)
        s2 = BinomialSpec(25, 0.45)
        for shift in (-5, 0, 3):
            assert match_prob(s1, s2, shift) == pytest.approx(match_prob_full(s1, s2, shift), abs=1e-15)

    def test_exact_symmetry(self) -> None:
        """Test swapping the laws at shift 0 gives the same float."""
        s1 = BinomialSpec(400, 0.37)
        s2 = BinomialSpec(350, 0.52)
        assert match_prob(s1, s2) == match_prob(s2, s1)

    def test_point_mass_left(self) -> None:
        """Test S degenerate at 0."""
        s2 = BinomialSpec(6, 0.3)
        assert match_prob(BinomialSpec(4, 0.0), s2) == pytest.approx(0.7 ** 6)

    def test_point_mass_right(self) -> None:
        """Test S' degenerate at m'."""
        s1 = BinomialSpec(5, 0.5)
        assert match_prob(s1, BinomialSpec(2, 1.0), 1) == pytest.approx(binom_pmf(s1, 3))

    def test_disjoint_windows(self) -> None:
        """Test far apart laws never match."""
        assert match_prob(BinomialSpec(10, 0.5), BinomialSpec(10, 0.5), 500) == 0.0

    def test_large_counts(self) -> None:
        """Test the window scales to large trial counts."""
        value = match_prob(BinomialSpec(10**6, 0.5), BinomialSpec(10**6, 0.5))
        sd = math.sqrt(2 * 10**6 * 0.25)
        # local CLT at the mode
        assert value == pytest.approx(1.0 / (math.sqrt(2 * math.pi) * sd), rel=1e-3)


class TestMatchProbMatrix:
    """Test the batched matching probabilities."""

    def test_matches_scalar(self) -> None:
        """Test every entry agrees with match_prob."""
        ms = [0, 3, 17, 40]
        ms_prime = [5, 22, 41]
        P = match_prob_matrix(ms, 0.35, ms_prime, 0.2)
        assert P.shape == (4, 3)
        for i, m in enumerate(ms):
            for j, mp in enumerate(ms_prime):
                expected = match_prob(BinomialSpec(m, 0.35), BinomialSpec(mp, 0.2))
                assert P[i, j] == pytest.approx(expected, abs=1e-14)

    def test_empty(self) -> None:
        """Test empty index lists."""
        assert match_prob_matrix([], 0.5, [1, 2], 0.5).shape == (0, 2)

    def test_degenerate_probabilities(self) -> None:
        """Test p = 0 on the left and p' = 1 on the right."""
        P = match_prob_matrix([2, 3], 0.0, [0, 1], 1.0)
        assert P.tolist() == [[1.0, 0.0], [1.0, 0.0]]


class TestComplementIdentity:
    """Test P(S = S' + n) under p -> 1 - p."""

    @pytest.mark.parametrize("m1,p1,m2,p2,shift", [
        (10, 0.3, 7, 0.6, 2),
        (25, 0.9, 25, 0.1, 0),
        (3, 0.5, 12, 0.45, -4),
    ])
    def test_identity_holds(self, m1: int, p1: float, m2: int, p2: float, shift: int) -> None:
        """Test both sides agree."""
        check = complement_identity_check(BinomialSpec(m1, p1), BinomialSpec(m2, p2), shift)
        assert check.passed, check.to_dict()


class TestShiftIdentities:
    """Test the shift recursions and integration by parts."""

    def test_identities_hold(self) -> None:
        """Test the three identities for a bounded F."""
        checks = shift_identities_check(math.cos, 12, 0.4)
        assert [c.name for c in checks] == ["shift_one_step", "shift_two_step", "integration_by_parts"]
        for check in checks:
            assert check.passed, check.to_dict()

    def test_zero_trials(self) -> None:
        """Test m = 0."""
        for check in shift_identities_check(lambda n: float(n * n), 0, 0.7):
            assert check.passed, check.to_dict()

    def test_rejects_p_zero(self) -> None:
        """Test p = 0 is refused."""
        with pytest.raises(ValueError, match="0 < p <= 1"):
            shift_identities_check(math.sin, 5, 0.0)


class TestPmfTimeDerivative:
    """Test d/da P(S_m(r/a) = n)."""

    def test_central_difference(self) -> None:
        """Test the formula against a central difference."""
        m, r, a, n = 10, 0.5, 1.0, 3
        h = 1e-6
        numeric = (
            binom_pmf(BinomialSpec(m, r / (a + h)), n)
            - binom_pmf(BinomialSpec(m, r / (a - h)), n)
        ) / (2 * h)
        assert pmf_time_derivative(m, r, a, n) == pytest.approx(numeric, abs=1e-6)

    def test_rejects_r_outside(self) -> None:
        """Test 0 < r < a is required."""
        with pytest.raises(ValueError):
            pmf_time_derivative(5, 1.0, 1.0, 2)
