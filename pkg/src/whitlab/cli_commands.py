"""
CLI commands.

Each command takes the effective ExperimentConfig and the parsed
arguments, writes its tables under the output directory and returns an
exit code. Failed checks return 1; configuration problems raise
ConfigurationError and numerical failures raise QuadratureError, which the
front end maps to exit codes 2 and 3.
"""
import argparse
import math
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import structlog
import yaml

from whitlab.config.parser import ExperimentConfig, create_example_config
from whitlab.core.covariance import (
    c1_integral,
    check_scaling_conditions,
    recentering_constant,
    rescaled_sweep,
)
from whitlab.core.elements import (
    GaussianMixture,
    LatticePoint,
    ParticleConfig,
    QuadResult,
    ScalingScheme,
    SpaceTimePoint,
)
from whitlab.core.identity_validator import IdentityValidator, available_suites
from whitlab.core.lattice import lattice_points
from whitlab.core.limits import (
    kappa0_closed_form,
    kappa0_integral,
    limit_covariance_result,
    recenter,
    weak_limit_covariance,
)
from whitlab.core.weak_form import holder_scan, weak_sweep
from whitlab.errors import ConfigurationError
from whitlab.output import (
    CsvOutput,
    JsonOutput,
    ResultOutput,
    TrajectoryBinaryOutput,
    TrajectoryCsvOutput,
)
from whitlab.output.trajectory import Trajectory
from whitlab.sim.death import binomial_fit_pvalue, sample_death_chain_at
from whitlab.sim.gaussian import (
    empirical_covariance,
    simulate_whittaker_euler,
    simulate_whittaker_gaussian,
    whittaker_covariance_matrix,
)
from whitlab.sim.particles import height_statistics, simulate_qwhittaker
from whitlab.sim.rng import RngStream
from whitlab.utils.audit import QuadratureAudit

logger = structlog.get_logger(__name__)

SIMULATE_STREAM = 1
QGROWTH_STREAM = 2

# Relative gap the final N of a sweep must reach
CONVERGENCE_TARGET = 0.10
# Ratio columns are bounded when their spread stays below this factor
HOLDER_SPREAD_LIMIT = 3.0

CONVERGE_COLUMNS = [
    'mode', 'N', 'raw', 'recentered', 'limit', 'abs_error', 'rel_error',
    'quad_err', 'limit_err', 'decreasing', 'left', 'middle', 'right', 'note',
]
CONSTANT_COLUMNS = ['component', 'lower', 'upper', 'value', 'abserr', 'neval', 'transform']
COVARIANCE_COLUMNS = [
    'time_i', 'point_i', 'time_j', 'point_j',
    'estimate', 'stderr', 'exact', 'z_score',
]
DEATH_COLUMNS = [
    'time', 'mean', 'stderr', 'binomial_mean',
    'variance', 'binomial_variance', 'chi2_pvalue',
]
HOLDER_COLUMNS = [
    'N', 's', 't', 'I', 'J', 'K', 'total', 'ratio_half',
    'ratio_I_half', 'ratio_J_one', 'ratio_K_one', 'quad_err',
]


def _write_table(
    config: ExperimentConfig,
    name: str,
    columns: Sequence[str],
    rows: Sequence[Dict[str, Any]],
    summary: Optional[Dict[str, Any]] = None
) -> str:
    """Write rows as <name>.csv or <name>.json, depending on output.format."""
    if config.output.format == 'json':
        path = config.output_path(f"{name}.json")
        with JsonOutput(config.config_hash()).writing(path) as document:
            document.write({'columns': list(columns), 'rows': list(rows)})
            if summary:
                document.write({'summary': summary})
    else:
        path = config.output_path(f"{name}.csv")
        with CsvOutput(columns, config.config_hash()).writing(path) as table:
            table.write_all(rows)
    logger.info("Table written", path=path, rows=len(rows))
    return path


def _write_summary(config: ExperimentConfig, name: str, summary: Dict[str, Any]) -> str:
    path = config.output_path(f"{name}.json")
    with JsonOutput(config.config_hash()).writing(path) as document:
        document.write(summary)
    return path


def _dump_trajectory(
    config: ExperimentConfig,
    name: str,
    trajectory: Trajectory,
    points: Sequence[LatticePoint],
    dump: str
) -> str:
    writer: ResultOutput
    if dump == 'binary':
        path = config.output_path(f"{name}.bin")
        writer = TrajectoryBinaryOutput()
    else:
        path = config.output_path(f"{name}.csv")
        writer = TrajectoryCsvOutput(points, config.config_hash())
    with writer.writing(path):
        writer.write(trajectory)
    logger.info("Trajectory written", path=path, format=dump)
    return path


def _audit(args: argparse.Namespace) -> QuadratureAudit:
    return QuadratureAudit(getattr(args, 'audit_log', None))


def _recentered(phi: GaussianMixture, psi: GaussianMixture, name: str, notes: List[str]) -> GaussianMixture:
    """R phi for a mass-carrying phi, noted; mass-zero phi unchanged."""
    if phi.is_mass_zero():
        return phi
    notes.append(f"{name} re-centered (mass {phi.total_mass:.6g})")
    logger.warning("Test function re-centered", name=name, mass=phi.total_mass)
    return recenter(phi, psi)


def _decreasing_flags(errors: Sequence[float], bars: Sequence[float]) -> List[bool]:
    """Row k decreases when err_k < err_{k-1} up to the combined error bars."""
    flags = [True]
    for k in range(1, len(errors)):
        flags.append(errors[k] < errors[k - 1] + bars[k] + bars[k - 1])
    return flags


def cmd_identities(config: ExperimentConfig, args: argparse.Namespace) -> int:
    """
    Run the exact-identity suites.

    Writes identities.json (the CheckResult) and prints one line per suite.

    Returns:
        0 if every check passed, 1 otherwise
    """
    only = config.identities.filter or None
    if only:
        unknown = [name for name in only if name not in available_suites()]
        if unknown:
            raise ConfigurationError(
                f"Unknown identity suites: {', '.join(unknown)} "
                f"(available: {', '.join(available_suites())})"
            )

    validator = IdentityValidator(
        seed=config.seed,
        instances=config.identities.instances,
        quad=config.quadrature,
        fault=getattr(args, 'inject_fault', None),
    )
    result = validator.run(only)
    path = _write_summary(config, "identities", result.to_dict())

    for suite, stats in result.info.items():
        mark = "✓" if stats['failures'] == 0 else "✗"
        print(f"{mark} {suite}: {stats['checks']} checks, max residual {stats['max_residual']:.3e}")
    for error in result.errors[:20]:
        print(f"  - {error}")
    print(f"Summary written to {path}")
    return 0 if result.valid else 1


def _sweep_summary(rows: Sequence[Dict[str, Any]], limit_value: float) -> Dict[str, Any]:
    final = rows[-1]
    return {
        'limit': limit_value,
        'monotone': all(r['decreasing'] for r in rows),
        'final_N': final['N'],
        'final_rel_error': final['rel_error'],
        'within_target': final['rel_error'] <= CONVERGENCE_TARGET,
    }


def _point_sweep(
    config: ExperimentConfig,
    args: argparse.Namespace,
    schemes: Sequence[ScalingScheme],
    notes: List[str]
) -> Tuple[List[Dict[str, Any]], float]:
    """Rows of covariance_rescaled - c_N against the limit at (x, s), (y, t)."""
    cv = config.converge
    quad = config.quadrature
    p1, p2 = SpaceTimePoint(cv.x, cv.s), SpaceTimePoint(cv.y, cv.t)
    row_notes: Dict[int, List[str]] = {}
    for scheme in schemes:
        check = check_scaling_conditions(p1, p2, scheme, config.scaling.T0, config.scaling.T1)
        if not check.valid:
            raise ConfigurationError("; ".join(check.errors))
        for warning in check.warnings:
            row_notes.setdefault(scheme.N, []).append(warning)
            notes.append(f"point N={scheme.N}: {warning}")
            logger.warning("Scaling condition", N=scheme.N, warning=warning)

    limit = limit_covariance_result(cv.x, cv.s, cv.y, cv.t, quad)
    _audit(args).log_result(limit, {'command': 'converge'})
    reports = rescaled_sweep(p1, p2, schemes, quad, config.workers)
    errors = [abs(r.recentered_value - limit.value) for r in reports]
    bars = [r.quadrature_error + limit.abserr for r in reports]
    rows: List[Dict[str, Any]] = []
    for report, err, flag in zip(reports, errors, _decreasing_flags(errors, bars)):
        left, middle, right = report.interval_breakdown
        rows.append({
            'mode': 'point',
            'N': report.N,
            'raw': report.raw_value,
            'recentered': report.recentered_value,
            'limit': limit.value,
            'abs_error': err,
            'rel_error': err / abs(limit.value) if limit.value else math.inf,
            'quad_err': report.quadrature_error,
            'limit_err': limit.abserr,
            'decreasing': flag,
            'left': left,
            'middle': middle,
            'right': right,
            'note': "; ".join(row_notes.get(report.N, [])),
        })
    return rows, limit.value


def _weak_sweep(
    config: ExperimentConfig,
    schemes: Sequence[ScalingScheme],
    notes: List[str]
) -> Tuple[List[Dict[str, Any]], float]:
    """Rows of the weak-form covariance against its limit; mass-carrying mixtures are re-centered."""
    cv = config.converge
    quad = config.quadrature
    weak_notes: List[str] = []
    phi1 = _recentered(cv.phi1, cv.psi, "phi1", weak_notes)
    phi2 = _recentered(cv.phi2, cv.psi, "phi2", weak_notes)
    notes.extend(f"weak: {n}" for n in weak_notes)
    limit_value = weak_limit_covariance(phi1, phi2, cv.s, cv.t, quad)
    results = weak_sweep(phi1, phi2, cv.s, cv.t, schemes, quad, config.workers)
    errors = [abs(r.value - limit_value) for r in results]
    bars = [r.abserr for r in results]
    rows: List[Dict[str, Any]] = []
    for scheme, result, err, flag in zip(schemes, results, errors, _decreasing_flags(errors, bars)):
        rows.append({
            'mode': 'weak',
            'N': scheme.N,
            'raw': result.value,
            'recentered': result.value,
            'limit': limit_value,
            'abs_error': err,
            'rel_error': err / abs(limit_value) if limit_value else math.inf,
            'quad_err': result.abserr,
            'decreasing': flag,
            'note': "; ".join(weak_notes),
        })
    return rows, limit_value


def cmd_converge(config: ExperimentConfig, args: argparse.Namespace) -> int:
    """
    N-sweep of the recentered covariance against its limit.

    By default one table holds both sweeps, tagged by the ``mode`` column:
    the point pair (x, s), (y, t) and the mixture pair (phi1, phi2) at
    times s, t. ``--point`` or ``--weak`` keeps one of them.

    Returns:
        0 if every sweep decreases within its error bars and ends within
        CONVERGENCE_TARGET of its limit, 1 otherwise
    """
    cv = config.converge
    schemes = config.scaling.schemes()
    if cv.s > cv.t:
        raise ConfigurationError(f"converge needs s <= t, got s={cv.s}, t={cv.t}")
    run_point = cv.mode in ('both', 'point')
    run_weak = cv.mode in ('both', 'weak')
    if run_point and cv.s == cv.t and tuple(cv.x) == tuple(cv.y):
        raise ConfigurationError(
            "Refused: the recentered covariance has a limit only for s < t or x != y; "
            f"got s = t = {cv.s} and x = y = {tuple(cv.x)}"
        )

    rows: List[Dict[str, Any]] = []
    notes: List[str] = []
    sweeps: Dict[str, Dict[str, Any]] = {}
    if run_point:
        point_rows, point_limit = _point_sweep(config, args, schemes, notes)
        rows.extend(point_rows)
        sweeps['point'] = _sweep_summary(point_rows, point_limit)
    if run_weak:
        weak_rows, weak_limit = _weak_sweep(config, schemes, notes)
        rows.extend(weak_rows)
        sweeps['weak'] = _sweep_summary(weak_rows, weak_limit)

    passed = all(s['monotone'] and s['within_target'] for s in sweeps.values())
    summary = {'sweeps': sweeps, 'passed': passed, 'target': CONVERGENCE_TARGET, 'notes': notes}
    path = _write_table(config, "converge", CONVERGE_COLUMNS, rows, summary)
    for mode, s in sweeps.items():
        mark = "✓" if s['monotone'] and s['within_target'] else "✗"
        print(f"{mark} {mode}: limit {s['limit']:.10g}; final relative error "
              f"{s['final_rel_error']:.3e} at N={s['final_N']}"
              f"{'' if s['monotone'] else ' (error not decreasing)'}")
    for note in notes:
        print(f"  note: {note}")
    print(f"Table written to {path}")
    if not passed:
        logger.warning("Convergence check failed", sweeps=sweeps)
        return 1
    return 0


def _constant_rows(name: str, result: QuadResult) -> List[Dict[str, Any]]:
    rows: List[Dict[str, Any]] = [{'component': name, 'value': result.value, 'abserr': result.abserr}]
    for seg in result.segments:
        rows.append({
            'component': 'segment',
            'lower': seg.lower,
            'upper': seg.upper,
            'value': seg.value,
            'abserr': seg.abserr,
            'neval': seg.neval,
            'transform': seg.transform,
        })
    return rows


def _write_constant(
    config: ExperimentConfig,
    name: str,
    result: QuadResult,
    extra_rows: Sequence[Dict[str, Any]],
    extra: Dict[str, Any]
) -> str:
    rows = _constant_rows(name, result) + list(extra_rows)
    if config.output.format == 'json':
        document = {'constant': name, 'value': result.value, 'abserr': result.abserr,
                    'audit': result.to_dict()}
        document.update(extra)
        document['tolerances'] = {'epsabs': config.quadrature.epsabs,
                                  'epsrel': config.quadrature.epsrel}
        return _write_summary(config, name, document)
    return _write_table(config, name, CONSTANT_COLUMNS, rows)


def cmd_c1(config: ExperimentConfig, args: argparse.Namespace) -> int:
    """c_1 with its audit trail, and c_N at every configured N."""
    quad = config.quadrature
    result = c1_integral(quad)
    _audit(args).log_result(result, {'command': 'c1', 'r_max': quad.r_max})
    c_N = {n: recentering_constant(n, quad) for n in config.scaling.N}
    extra_rows = [{'component': f"c_N[N={n}]", 'value': v, 'abserr': result.abserr}
                  for n, v in c_N.items()]
    path = _write_constant(config, "c1", result, extra_rows, {'recentering': {str(n): v for n, v in c_N.items()}})
    print(f"c1 = {result.value:.15g} +/- {result.abserr:.3e} ({len(result.segments)} segments)")
    print(f"Written to {path}")
    return 0


def cmd_kappa0(config: ExperimentConfig, args: argparse.Namespace) -> int:
    """kappa_0 with its audit trail and the exponential-integral cross-check."""
    result = kappa0_integral(config.quadrature)
    _audit(args).log_result(result, {'command': 'kappa0'})
    closed = kappa0_closed_form()
    gap = abs(result.value - closed)
    extra_rows = [{'component': 'closed_form', 'value': closed, 'abserr': gap}]
    path = _write_constant(config, "kappa0", result, extra_rows,
                           {'closed_form': closed, 'closed_form_gap': gap})
    print(f"kappa0 = {result.value:.15g} +/- {result.abserr:.3e} (closed form gap {gap:.3e})")
    print(f"Written to {path}")
    return 0


def _covariance_rows(
    sample_values: np.ndarray,
    times: np.ndarray,
    points: Tuple[LatticePoint, ...],
    selected: Sequence[LatticePoint],
    config: ExperimentConfig
) -> List[Dict[str, Any]]:
    """Empirical against exact covariances over the selected points at every time."""
    index = {a: i for i, a in enumerate(points)}
    chosen = sorted(selected, key=lambda a: a.sort_key)
    columns = [(ti, a) for ti in range(len(times)) for a in chosen]
    flat = sample_values.reshape(sample_values.shape[0], -1)
    data = np.stack([flat[:, ti * len(points) + index[a]] for ti, a in columns], axis=1)
    exact = whittaker_covariance_matrix(times, chosen, config.quadrature)

    pairs = [(i, j) for i in range(len(columns)) for j in range(i, len(columns))]
    rows = []
    for est in empirical_covariance(data, pairs):
        i, j = est.pair
        (ti, a), (tj, b) = columns[i], columns[j]
        reference = float(exact[i, j])
        z = (est.estimate - reference) / est.stderr if est.stderr > 0 else 0.0
        rows.append({
            'time_i': float(times[ti]), 'point_i': f"{a.a1}_{a.a2}",
            'time_j': float(times[tj]), 'point_j': f"{b.a1}_{b.a2}",
            'estimate': est.estimate, 'stderr': est.stderr,
            'exact': reference, 'z_score': z,
        })
    return rows


def cmd_simulate(config: ExperimentConfig, args: argparse.Namespace) -> int:
    """
    Monte Carlo run.

    gaussian and euler modes dump the paths and a covariance table against
    covariance_exact; death mode tabulates the chain's marginals against
    Binomial(m0, e^-t).
    """
    sim = config.simulate
    rng = RngStream(config.seed, SIMULATE_STREAM)

    if sim.mode == 'death':
        rows = []
        for k, t in enumerate(sim.times):
            states = sample_death_chain_at(sim.m0, t, sim.n_paths, rng.substream(k))
            p = math.exp(-t)
            mean = float(states.mean())
            variance = float(states.var(ddof=1)) if len(states) > 1 else 0.0
            rows.append({
                'time': t,
                'mean': mean,
                'stderr': math.sqrt(variance / len(states)),
                'binomial_mean': sim.m0 * p,
                'variance': variance,
                'binomial_variance': sim.m0 * p * (1.0 - p),
                'chi2_pvalue': binomial_fit_pvalue(states, sim.m0, t),
            })
        path = _write_table(config, "simulate_death", DEATH_COLUMNS, rows)
        print(f"Death-chain marginals written to {path}")
        return 0

    if sim.mode == 'gaussian':
        pairs = [(a, t) for t in sim.times for a in sim.points]
        sample = simulate_whittaker_gaussian(pairs, sim.n_paths, rng, config.quadrature)
    else:
        xi0 = np.zeros(len(lattice_points(sim.L)))
        sample = simulate_whittaker_euler(sim.L, xi0, sim.times, sim.n_paths, rng)

    dump = _dump_trajectory(config, f"simulate_{sim.mode}", sample, sample.points, sim.dump)
    rows = _covariance_rows(sample.values, sample.times, sample.points, sim.points, config)
    table = _write_table(config, f"simulate_{sim.mode}_covariance", COVARIANCE_COLUMNS, rows)
    worst = max((abs(r['z_score']) for r in rows), default=0.0)
    print(f"{sample.n_samples} paths written to {dump}; covariance table {table} (max |z| {worst:.2f})")
    return 0


def cmd_qgrowth(config: ExperimentConfig, args: argparse.Namespace) -> int:
    """q-Whittaker run from the packed configuration with height statistics."""
    qg = config.qgrowth
    snapshot_times = np.linspace(0.0, qg.horizon, qg.snapshots)
    trajectory = simulate_qwhittaker(
        qg.L, qg.q, ParticleConfig.zeros(qg.L), qg.horizon,
        RngStream(config.seed, QGROWTH_STREAM),
        snapshot_times=snapshot_times,
        max_events=qg.max_events,
    )
    dump = _dump_trajectory(config, "qgrowth", trajectory, trajectory.points, config.simulate.dump)

    stats = height_statistics(trajectory)
    columns = ['time', 'mean', 'total'] + [f"level_{k}" for k in range(1, qg.L + 1)]
    rows = []
    for i, t in enumerate(stats.times):
        row = {'time': float(t), 'mean': float(stats.mean[i]), 'total': float(stats.total[i])}
        for k in range(qg.L):
            row[f"level_{k + 1}"] = float(stats.per_level[i, k])
        rows.append(row)
    table = _write_table(config, "qgrowth_heights", columns, rows)
    print(f"{trajectory.n_events} events, interlacing held throughout; "
          f"trajectory {dump}, heights {table}")
    return 0


def cmd_holder(config: ExperimentConfig, args: argparse.Namespace) -> int:
    """
    Hoelder decomposition scan over the configured gaps and levels.

    Returns:
        0 if every ratio column spread is within HOLDER_SPREAD_LIMIT, 1 otherwise
    """
    holder = config.holder
    notes: List[str] = []
    phi = _recentered(holder.phi, config.converge.psi, "phi", notes)
    schemes = [ScalingScheme(N=n, eta=config.scaling.eta) for n in holder.N]
    scan = holder_scan(
        phi, holder.grid(), schemes, config.quadrature,
        config.scaling.T0, config.scaling.T1, config.workers,
    )
    bounded = {c: spread <= HOLDER_SPREAD_LIMIT for c, spread in scan.spreads.items()}
    summary = {'constants': scan.constants, 'spreads': scan.spreads,
               'bounded': bounded, 'notes': notes}
    path = _write_table(config, "holder", HOLDER_COLUMNS, scan.to_rows(), summary)
    for column, constant in scan.constants.items():
        print(f"{column}: constant {constant:.6g}, spread {scan.spreads[column]:.3f}")
    unbounded = [c for c, ok in bounded.items() if not ok]
    for column in unbounded:
        print(f"✗ {column}: spread {scan.spreads[column]:.3f} exceeds {HOLDER_SPREAD_LIMIT}")
    for note in notes:
        print(f"  note: {note}")
    print(f"Table written to {path}")
    if unbounded:
        logger.warning("Ratio column spread exceeds limit", columns=unbounded, spreads=scan.spreads)
        return 1
    return 0


def cmd_example_config(config: ExperimentConfig, args: argparse.Namespace) -> int:
    """Print an example configuration file."""
    print(yaml.safe_dump(create_example_config(), sort_keys=False), end='')
    return 0


COMMANDS = {
    'identities': cmd_identities,
    'converge': cmd_converge,
    'c1': cmd_c1,
    'kappa0': cmd_kappa0,
    'simulate': cmd_simulate,
    'qgrowth': cmd_qgrowth,
    'holder': cmd_holder,
    'example-config': cmd_example_config,
}
