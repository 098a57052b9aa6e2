"""
Linear pure death chains and the pair chain on the lattice.

A death chain moves k -> k - 1 at rate k, so its holding times are
independent exponentials with rates m0, m0 - 1, ..., 1 and its state at
time t is Binomial(m0, e^-t). Two independent chains D1, D2 started at
the death pair of a point a move Sigma(D1, D2) by the lattice generator.
"""
import math
from typing import Dict, List, Sequence

import numpy as np
import structlog
from scipy.stats import binom, chisquare

from whitlab.core.elements import (
    DeathPair,
    DeathTrajectory,
    LatticePoint,
    LatticeTrajectory,
    RateEstimate,
)
from whitlab.core.lattice import delta_map, sigma_map
from whitlab.sim.rng import RngStream

logger = structlog.get_logger(__name__)


def _jump_times(m0: int, horizon: float, gen: np.random.Generator) -> np.ndarray:
    """Jump times up to the horizon of a chain started at m0."""
    if m0 == 0:
        return np.empty(0)
    rates = np.arange(m0, 0, -1, dtype=float)
    times = np.cumsum(gen.exponential(1.0 / rates))
    return times[times <= horizon]


def simulate_death_chain(m0: int, horizon: float, rng: RngStream) -> DeathTrajectory:
    """
    One path of the death chain on [0, horizon].

    Args:
        m0: Initial state, >= 0
        horizon: Final time
        rng: Random stream

    Returns:
        DeathTrajectory whose states[0] is m0
    """
    if m0 < 0:
        raise ValueError(f"Initial state must be >= 0, got {m0}")
    if horizon < 0:
        raise ValueError(f"Horizon must be >= 0, got {horizon}")
    times = _jump_times(m0, horizon, rng.generator())
    states = m0 - np.arange(len(times) + 1)
    return DeathTrajectory(jump_times=times, states=states, horizon=horizon)


def sample_death_chain_at(m0: int, t: float, n_paths: int, rng: RngStream) -> np.ndarray:
    """
    States at time t of n_paths independent death chains started at m0.

    Each row of holding times is cumulated and the jumps before t are
    counted.
    """
    if m0 < 0:
        raise ValueError(f"Initial state must be >= 0, got {m0}")
    if t < 0:
        raise ValueError(f"Time must be >= 0, got {t}")
    if m0 == 0:
        return np.zeros(n_paths, dtype=np.int64)
    gen = rng.generator()
    rates = np.arange(m0, 0, -1, dtype=float)
    holds = gen.exponential(1.0, size=(n_paths, m0)) / rates
    jumps = (np.cumsum(holds, axis=1) <= t).sum(axis=1)
    return m0 - jumps


def simulate_lattice_chain(a0: LatticePoint, horizon: float, rng: RngStream) -> LatticeTrajectory:
    """
    The pair chain Sigma(D1, D2) started at a0.

    Jumps a -> a - (1,1) come from D1 and a -> a - (0,1) from D2.
    """
    gen = rng.generator()
    start = delta_map(a0)
    first = _jump_times(start.m1, horizon, gen)
    second = _jump_times(start.m2, horizon, gen)

    events = sorted([(float(t), 0) for t in first] + [(float(t), 1) for t in second])
    m1, m2 = start.m1, start.m2
    states = [a0]
    for _, which in events:
        if which == 0:
            m1 -= 1
        else:
            m2 -= 1
        states.append(sigma_map(DeathPair(m1, m2)))
    return LatticeTrajectory(
        jump_times=tuple(t for t, _ in events),
        states=tuple(states),
        horizon=horizon,
    )


def estimate_lattice_rates(
    trajectories: Sequence[LatticeTrajectory],
    a: LatticePoint
) -> List[RateEstimate]:
    """
    Empirical jump rates out of a towards a - (1,1) and a - (0,1).

    The rate is jumps / exposure with Poisson standard error
    sqrt(jumps) / exposure; targets outside the lattice are skipped.
    """
    targets: Dict[LatticePoint, int] = {}
    if a.a1 > 1:
        targets[LatticePoint.of(a.a1 - 1, a.a2 - 1)] = 0
    if a.a2 > a.a1:
        targets[LatticePoint.of(a.a1, a.a2 - 1)] = 0

    exposure = 0.0
    for path in trajectories:
        ends = list(path.jump_times) + [path.horizon]
        start = 0.0
        for state, end, following in zip(path.states, ends, list(path.states[1:]) + [None]):
            if state == a:
                exposure += end - start
                if following is not None and following in targets:
                    targets[following] += 1
            start = end

    estimates = []
    for target, jumps in targets.items():
        rate = jumps / exposure if exposure > 0 else math.nan
        stderr = math.sqrt(jumps) / exposure if exposure > 0 else math.nan
        estimates.append(RateEstimate(target=target, rate=rate, stderr=stderr, jumps=jumps, exposure=exposure))
    logger.debug("Lattice rates estimated", state=repr(a), exposure=exposure, paths=len(trajectories))
    return estimates


# Pooled bins must expect at least this many observations
CHI_SQUARE_MIN_EXPECTED = 5.0


def binomial_fit_pvalue(states: np.ndarray, m0: int, t: float) -> float:
    """
    Chi-square p-value of death-chain states against Binomial(m0, e^-t).

    Adjacent values are pooled from the left until each bin expects at
    least CHI_SQUARE_MIN_EXPECTED observations; an underfull last bin is
    merged into its neighbour. Returns 1.0 when fewer than two bins remain.
    """
    states = np.asarray(states, dtype=np.int64)
    n = len(states)
    if n == 0:
        raise ValueError("Need at least one state")
    ks = np.arange(m0 + 1)
    expected = n * binom.pmf(ks, m0, math.exp(-t))
    observed = np.bincount(states, minlength=m0 + 1)[:m0 + 1].astype(float)

    bins_obs: List[float] = []
    bins_exp: List[float] = []
    acc_obs = acc_exp = 0.0
    for o, e in zip(observed, expected):
        acc_obs += o
        acc_exp += e
        if acc_exp >= CHI_SQUARE_MIN_EXPECTED:
            bins_obs.append(acc_obs)
            bins_exp.append(acc_exp)
            acc_obs = acc_exp = 0.0
    if bins_exp:
        bins_obs[-1] += acc_obs
        bins_exp[-1] += acc_exp
    if len(bins_exp) < 2:
        return 1.0

    exp_arr = np.asarray(bins_exp)
    exp_arr *= n / exp_arr.sum()
    return float(chisquare(np.asarray(bins_obs), exp_arr).pvalue)
