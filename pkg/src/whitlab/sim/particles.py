"""
q-Whittaker interlacing particle system.

Particle a jumps lambda(a) -> lambda(a) + 1 at rate c_q(a, lambda) and
pushes the vertical string a + (0,1), a + (0,2), ... that shares its old
position. The rate vanishes exactly when a is blocked by a - (1,1).
Every event is followed by a full interlacing check.
"""
from collections import deque
from dataclasses import dataclass
from typing import Any, Deque, Dict, List, Optional, Sequence

import numpy as np
import structlog

from whitlab.core.elements import LatticePoint, ParticleConfig, ParticleTrajectory
from whitlab.core.lattice import lattice_points
from whitlab.errors import InterlacingError
from whitlab.sim.rng import RngStream

logger = structlog.get_logger(__name__)

# Events kept for the error report
EVENT_LOG_DEPTH = 256


@dataclass(frozen=True, eq=False)
class HeightStatistics:
    """Heights of a q-Whittaker run at its snapshot times."""
    times: np.ndarray
    mean: np.ndarray
    total: np.ndarray
    per_level: np.ndarray


def _factor(q: float, exponent: Optional[int]) -> float:
    """1 - q^exponent, or 1 for a neighbour outside the lattice."""
    if exponent is None:
        return 1.0
    return 1.0 - q ** exponent


def qwhittaker_rate(config: ParticleConfig, a: LatticePoint, q: float) -> float:
    """
    c_q(a, lambda).

    (1 - q^{lambda(a1-1,a2-1) - lambda(a)}) (1 - q^{lambda(a) - lambda(a1+1,a2) + 1})
    / (1 - q^{lambda(a) - lambda(a1,a2-1) + 1}), with factor 1 for neighbours
    outside the truncated lattice. At q = 0 the rate is 1 unless blocked.
    """
    if not 0.0 <= q < 1.0:
        raise ValueError(f"q must be in [0, 1), got {q}")
    here = config.get(a.a1, a.a2)
    if here is None:
        raise ValueError(f"{a!r} is outside the lattice of size {config.L}")
    blocker = config.get(a.a1 - 1, a.a2 - 1)
    right = config.get(a.a1 + 1, a.a2)
    below = config.get(a.a1, a.a2 - 1)

    numerator = _factor(q, None if blocker is None else blocker - here)
    numerator *= _factor(q, None if right is None else here - right + 1)
    denominator = _factor(q, None if below is None else here - below + 1)
    return numerator / denominator


def _apply_jump(config: ParticleConfig, a: LatticePoint) -> int:
    """Move a and the string above it sharing its position; return the number pushed."""
    old = config.positions[a]
    config.positions[a] = old + 1
    pushed = 0
    a2 = a.a2 + 1
    while a2 <= config.L:
        above = LatticePoint.of(a.a1, a2)
        if config.positions[above] != old:
            break
        config.positions[above] = old + 1
        pushed += 1
        a2 += 1
    return pushed


def simulate_qwhittaker(
    L: int,
    q: float,
    config0: ParticleConfig,
    horizon: float,
    rng: RngStream,
    snapshot_times: Optional[Sequence[float]] = None,
    max_events: Optional[int] = None
) -> ParticleTrajectory:
    """
    Gillespie simulation of the q-Whittaker process on [0, horizon].

    Args:
        L: Truncation level
        q: Parameter in [0, 1)
        config0: Interlacing initial configuration on the same lattice
        horizon: Final time
        rng: Random stream
        snapshot_times: Times at which positions are recorded
            (default: 0 and the horizon)
        max_events: Stop early after this many events

    Raises:
        ValueError: If config0 does not interlace or has another size
        InterlacingError: If an event breaks interlacing
    """
    if config0.L != L:
        raise ValueError(f"Initial configuration has L={config0.L}, expected {L}")
    violation = config0.interlacing_violation()
    if violation is not None:
        raise ValueError(f"Initial configuration does not interlace: {violation}")
    if not 0.0 <= q < 1.0:
        raise ValueError(f"q must be in [0, 1), got {q}")

    points = lattice_points(L)
    snaps = np.asarray(snapshot_times if snapshot_times is not None else [0.0, horizon], dtype=float)
    if np.any(np.diff(snaps) < 0):
        raise ValueError("Snapshot times must be nondecreasing")

    gen = rng.generator()
    config = config0.copy()
    snapshots = np.zeros((len(snaps), len(points)), dtype=np.int64)
    next_snap = 0
    event_times: List[float] = []
    event_sites: List[int] = []
    event_pushes: List[int] = []
    recent: Deque[Dict[str, Any]] = deque(maxlen=EVENT_LOG_DEPTH)

    def record_until(t: float) -> None:
        nonlocal next_snap
        while next_snap < len(snaps) and snaps[next_snap] <= t:
            snapshots[next_snap] = [config.positions[a] for a in points]
            next_snap += 1

    t = 0.0
    while True:
        rates = np.array([qwhittaker_rate(config, a, q) for a in points])
        total = float(rates.sum())
        if total <= 0.0:
            break
        t_next = t + gen.exponential(1.0 / total)
        if t_next > horizon or (max_events is not None and len(event_times) >= max_events):
            break
        record_until(np.nextafter(t_next, -np.inf))
        site = int(np.searchsorted(np.cumsum(rates), gen.uniform(0.0, total), side='right'))
        site = min(site, len(points) - 1)
        pushes = _apply_jump(config, points[site])
        t = t_next

        event_times.append(t)
        event_sites.append(site)
        event_pushes.append(pushes)
        recent.append({'time': t, 'site': points[site].as_tuple(), 'pushes': pushes})
        violation = config.interlacing_violation()
        if violation is not None:
            logger.error("Interlacing violated", violation=violation, events=len(event_times))
            raise InterlacingError(violation, list(recent))

    record_until(horizon)
    logger.info("q-Whittaker run finished", L=L, q=q, events=len(event_times), horizon=horizon)
    return ParticleTrajectory(
        points=points,
        event_times=np.asarray(event_times),
        event_sites=np.asarray(event_sites, dtype=np.int64),
        event_pushes=np.asarray(event_pushes, dtype=np.int64),
        snapshot_times=snaps,
        snapshots=snapshots,
        final=config,
    )


def height_statistics(trajectory: ParticleTrajectory) -> HeightStatistics:
    """Mean and total height and the summed height of each level a2 at every snapshot."""
    snaps = trajectory.snapshots.astype(float)
    levels = max(a.a2 for a in trajectory.points)
    per_level = np.zeros((snaps.shape[0], levels))
    for i, a in enumerate(trajectory.points):
        per_level[:, a.a2 - 1] += snaps[:, i]
    return HeightStatistics(
        times=trajectory.snapshot_times,
        mean=snaps.mean(axis=1),
        total=snaps.sum(axis=1),
        per_level=per_level,
    )
