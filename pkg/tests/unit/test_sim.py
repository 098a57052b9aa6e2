"""
Unit tests for random streams and the death-chain samplers.
"""
import math

import numpy as np
import pytest

from whitlab.core.elements import LatticePoint
from whitlab.sim.death import (
    binomial_fit_pvalue,
    estimate_lattice_rates,
    sample_death_chain_at,
    simulate_death_chain,
    simulate_lattice_chain,
)
from whitlab.sim.rng import RngStream


class TestRngStream:
    """Test counter-based random streams."""

    def test_reproducible(self) -> None:
        """Test equal (seed, stream) give equal draws."""
        a = RngStream(11, 3).generator().standard_normal(5)
        b = RngStream(11, 3).generator().standard_normal(5)
        assert np.array_equal(a, b)

    def test_streams_differ(self) -> None:
        """Test different stream ids give different draws."""
        a = RngStream(11, 0).generator().standard_normal(5)
        b = RngStream(11, 1).generator().standard_normal(5)
        assert not np.array_equal(a, b)

    def test_substreams_differ(self) -> None:
        """Test substreams are distinct from each other and the parent."""
        root = RngStream(2024, 1)
        ids = {root.stream_id, root.substream(0).stream_id, root.substream(1).stream_id}
        assert len(ids) == 3

    def test_rejects_negative_seed(self) -> None:
        """Test seeds are unsigned."""
        with pytest.raises(ValueError, match="Seed"):
            RngStream(-1)


class TestDeathChain:
    """Test the linear pure death chain."""

    def test_path_shape(self) -> None:
        """Test states decrease by one per jump."""
        path = simulate_death_chain(20, 5.0, RngStream(1))
        assert path.states[0] == 20
        assert len(path.states) == len(path.jump_times) + 1
        assert np.all(np.diff(path.states) == -1)
        assert np.all(np.diff(path.jump_times) > 0)
        assert np.all(path.jump_times <= 5.0)

    def test_state_at(self) -> None:
        """Test the state lookup between jumps."""
        path = simulate_death_chain(5, 100.0, RngStream(2))
        assert path.state_at(0.0) == 5
        assert path.state_at(100.0) == 5 - len(path.jump_times)

    def test_empty_chain(self) -> None:
        """Test m0 = 0 never jumps."""
        path = simulate_death_chain(0, 3.0, RngStream(3))
        assert len(path.jump_times) == 0
        assert path.state_at(1.0) == 0

    def test_binomial_marginal(self) -> None:
        """Test the state at t is Binomial(m0, e^-t)."""
        m0, t = 50, 0.7
        states = sample_death_chain_at(m0, t, 4000, RngStream(20240917, 1))
        p = math.exp(-t)
        assert states.mean() == pytest.approx(m0 * p, abs=5 * math.sqrt(m0 * p * (1 - p) / 4000))
        assert binomial_fit_pvalue(states, m0, t) > 1e-4

    def test_fit_rejects_wrong_law(self) -> None:
        """Test the fit detects a shifted law."""
        states = sample_death_chain_at(50, 0.7, 4000, RngStream(9))
        assert binomial_fit_pvalue(states, 50, 0.3) < 1e-6

    def test_rejects_negative_state(self) -> None:
        """Test m0 >= 0."""
        with pytest.raises(ValueError):
            simulate_death_chain(-1, 1.0, RngStream(0))
        with pytest.raises(ValueError):
            sample_death_chain_at(-1, 1.0, 10, RngStream(0))


class TestLatticeChain:
    """Test the pair chain on the lattice."""

    def test_moves(self) -> None:
        """Test every jump is a - (1,1) or a - (0,1)."""
        path = simulate_lattice_chain(LatticePoint(4, 9), 10.0, RngStream(4))
        assert path.states[0] == LatticePoint(4, 9)
        for before, after in zip(path.states, path.states[1:]):
            step = (before.a1 - after.a1, before.a2 - after.a2)
            assert step in ((1, 1), (0, 1))

    def test_rates(self) -> None:
        """Test empirical rates out of (3, 5) match a1 - 1 and a2 - a1."""
        a = LatticePoint(3, 5)
        paths = [simulate_lattice_chain(a, 2.0, RngStream(77, i)) for i in range(3000)]
        estimates = {e.target: e for e in estimate_lattice_rates(paths, a)}
        down = estimates[LatticePoint(2, 4)]
        left = estimates[LatticePoint(3, 4)]
        assert abs(down.rate - 2.0) <= 5 * down.stderr
        assert abs(left.rate - 2.0) <= 5 * left.stderr
        assert down.exposure == left.exposure > 0.0
