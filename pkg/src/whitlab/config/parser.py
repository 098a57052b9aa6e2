"""
Experiment configuration parser.

Supports YAML files with optional sections; anything left out falls back to
the defaults below. Command-line flags are applied on top by the CLI.
"""
import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import structlog
import yaml

from whitlab.core.elements import (
    DEFAULT_ETA,
    DEFAULT_T0,
    DEFAULT_T1,
    GaussianMixture,
    LatticePoint,
    MixtureTerm,
    QuadratureConfig,
    ScalingScheme,
)
from whitlab.core.limits import bump_difference, default_psi
from whitlab.errors import ConfigurationError

logger = structlog.get_logger(__name__)

OUTPUT_DIR_ENV = "WHITLAB_OUTPUT_DIR"
DEFAULT_OUTPUT_DIR = "results"
DEFAULT_SEED = 20240917

SECTIONS = (
    'scaling', 'quadrature', 'rng', 'output', 'sweep',
    'identities', 'converge', 'simulate', 'qgrowth', 'holder',
)
OUTPUT_FORMATS = ('csv', 'json')
SIMULATE_MODES = ('gaussian', 'euler', 'death')
DUMP_FORMATS = ('csv', 'binary')
CONVERGE_MODES = ('both', 'point', 'weak')


def _default_output_dir() -> str:
    return os.environ.get(OUTPUT_DIR_ENV, DEFAULT_OUTPUT_DIR)


@dataclass
class ScalingSection:
    """Rescaling levels and the time window [T0, T1]."""
    eta: float = DEFAULT_ETA
    N: List[int] = field(default_factory=lambda: [2 ** 10, 2 ** 12, 2 ** 14, 2 ** 16])
    T0: float = DEFAULT_T0
    T1: float = DEFAULT_T1

    def schemes(self) -> List[ScalingScheme]:
        return [ScalingScheme(N=n, eta=self.eta) for n in self.N]


@dataclass
class OutputSection:
    directory: str = field(default_factory=_default_output_dir)
    format: str = 'csv'


@dataclass
class IdentitiesSection:
    instances: int = 1000
    filter: List[str] = field(default_factory=list)


@dataclass
class ConvergeSection:
    """Point pair and mixture pair of the N-sweep."""
    x: Tuple[float, float] = (0.0, 0.0)
    s: float = 1.0
    y: Tuple[float, float] = (1.0, 1.0)
    t: float = 2.0
    mode: str = 'both'
    phi1: GaussianMixture = field(
        default_factory=lambda: bump_difference((0.0, 0.0), (1.0, 0.0)))
    phi2: GaussianMixture = field(
        default_factory=lambda: bump_difference((0.0, 1.0), (1.0, 1.0)))
    psi: GaussianMixture = field(default_factory=default_psi)


@dataclass
class SimulateSection:
    """Monte Carlo run: exact Gaussian, log-time Euler or death chain."""
    mode: str = 'gaussian'
    L: int = 3
    n_paths: int = 1000
    times: List[float] = field(default_factory=lambda: [1.0, 2.0])
    points: List[LatticePoint] = field(
        default_factory=lambda: [LatticePoint(1, 1), LatticePoint(2, 2)])
    m0: int = 50
    dump: str = 'csv'


@dataclass
class QgrowthSection:
    L: int = 5
    q: float = 0.5
    horizon: float = 10.0
    snapshots: int = 101
    max_events: Optional[int] = None


@dataclass
class HolderSection:
    """Hoelder scan: s fixed, t = s + gap, over the listed N."""
    phi: GaussianMixture = field(
        default_factory=lambda: bump_difference((0.0, 0.0), (1.0, 0.0)))
    s: float = 1.0
    gaps: List[float] = field(default_factory=lambda: [0.2, 0.05, 0.0125])
    N: List[int] = field(default_factory=lambda: [2 ** 10, 2 ** 12, 2 ** 14])

    def grid(self) -> List[Tuple[float, float]]:
        return [(self.s, self.s + gap) for gap in self.gaps]


@dataclass
class ExperimentConfig:
    """
    Effective configuration of one CLI invocation.

    Attributes:
        scaling: eta, N list and the window [T0, T1]
        quadrature: Tolerances for every integral
        seed: Root seed of all random streams
        output: Output directory and table format
        workers: Process-pool size for sweeps (None = available CPUs)
        identities, converge, simulate, qgrowth, holder: Command parameters
    """
    scaling: ScalingSection = field(default_factory=ScalingSection)
    quadrature: QuadratureConfig = field(default_factory=QuadratureConfig)
    seed: int = DEFAULT_SEED
    output: OutputSection = field(default_factory=OutputSection)
    workers: Optional[int] = None
    identities: IdentitiesSection = field(default_factory=IdentitiesSection)
    converge: ConvergeSection = field(default_factory=ConvergeSection)
    simulate: SimulateSection = field(default_factory=SimulateSection)
    qgrowth: QgrowthSection = field(default_factory=QgrowthSection)
    holder: HolderSection = field(default_factory=HolderSection)

    def to_dict(self) -> Dict[str, Any]:
        """Plain-data view; mixtures and lattice points become lists."""
        return _plain(dataclasses.asdict(self))

    def config_hash(self) -> str:
        """
        SHA-256 of the canonical JSON dump.

        The output directory is left out so the same experiment written to
        two places carries the same hash.
        """
        data = self.to_dict()
        data['output'].pop('directory', None)
        canonical = json.dumps(data, sort_keys=True, separators=(',', ':'))
        return hashlib.sha256(canonical.encode('utf-8')).hexdigest()

    def output_path(self, name: str) -> str:
        return str(Path(self.output.directory) / name)


def _plain(value: Any) -> Any:
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


class ConfigParser:
    """
    Parse YAML experiment files into an ExperimentConfig.
    """

    @staticmethod
    def parse_file(config_path: str) -> ExperimentConfig:
        """
        Parse a configuration file.

        Args:
            config_path: Path to YAML configuration file

        Returns:
            Effective ExperimentConfig

        Raises:
            ConfigurationError: If configuration is invalid
            FileNotFoundError: If config file doesn't exist
        """
        path = Path(config_path)
        if not path.exists():
            raise FileNotFoundError(f"Configuration file not found: {config_path}")

        with open(path, 'r') as f:
            try:
                config = yaml.safe_load(f)
            except yaml.YAMLError as e:
                raise ConfigurationError(f"Invalid YAML in {config_path}: {e}")

        return ConfigParser.parse_dict(config or {})

    @staticmethod
    def parse_dict(config: Dict[str, Any]) -> ExperimentConfig:
        """
        Parse a configuration dictionary.

        Args:
            config: Configuration dictionary; every section is optional

        Returns:
            Effective ExperimentConfig

        Raises:
            ConfigurationError: If a section or value is invalid
        """
        if not isinstance(config, dict):
            raise ConfigurationError("Configuration must be a mapping of sections")
        unknown = set(config) - set(SECTIONS)
        if unknown:
            raise ConfigurationError(f"Unknown configuration sections: {sorted(unknown)}")

        try:
            experiment = ExperimentConfig(
                scaling=ConfigParser._parse_scaling(config.get('scaling') or {}),
                quadrature=ConfigParser._parse_quadrature(config.get('quadrature') or {}),
                seed=int((config.get('rng') or {}).get('seed', DEFAULT_SEED)),
                output=ConfigParser._parse_output(config.get('output') or {}),
                workers=ConfigParser._parse_workers(config.get('sweep') or {}),
                identities=ConfigParser._parse_identities(config.get('identities') or {}),
                converge=ConfigParser._parse_converge(config.get('converge') or {}),
                simulate=ConfigParser._parse_simulate(config.get('simulate') or {}),
                qgrowth=ConfigParser._parse_qgrowth(config.get('qgrowth') or {}),
                holder=ConfigParser._parse_holder(config.get('holder') or {}),
            )
        except ConfigurationError:
            raise
        except (TypeError, ValueError, KeyError) as e:
            raise ConfigurationError(f"Invalid configuration: {e}")

        validate_config(experiment)
        logger.debug("Configuration parsed", config_sha256=experiment.config_hash())
        return experiment

    @staticmethod
    def _parse_scaling(section: Dict[str, Any]) -> ScalingSection:
        defaults = ScalingSection()
        N = section.get('N', defaults.N)
        if isinstance(N, int):
            N = [N]
        return ScalingSection(
            eta=float(section.get('eta', defaults.eta)),
            N=[int(n) for n in N],
            T0=float(section.get('T0', defaults.T0)),
            T1=float(section.get('T1', defaults.T1)),
        )

    @staticmethod
    def _parse_quadrature(section: Dict[str, Any]) -> QuadratureConfig:
        defaults = QuadratureConfig()
        return QuadratureConfig(
            epsabs=float(section.get('epsabs', defaults.epsabs)),
            epsrel=float(section.get('epsrel', defaults.epsrel)),
            limit=int(section.get('limit', defaults.limit)),
            r_max=float(section.get('r_max', defaults.r_max)),
            failure_factor=float(section.get('failure_factor', defaults.failure_factor)),
            spatial_nodes=int(section.get('spatial_nodes', defaults.spatial_nodes)),
        )

    @staticmethod
    def _parse_output(section: Dict[str, Any]) -> OutputSection:
        output = OutputSection()
        if 'directory' in section:
            output.directory = str(section['directory'])
        output.format = str(section.get('format', output.format)).lower()
        return output

    @staticmethod
    def _parse_workers(section: Dict[str, Any]) -> Optional[int]:
        workers = section.get('workers')
        return None if workers is None else int(workers)

    @staticmethod
    def _parse_identities(section: Dict[str, Any]) -> IdentitiesSection:
        flt = section.get('filter', [])
        if isinstance(flt, str):
            flt = [name.strip() for name in flt.split(',') if name.strip()]
        return IdentitiesSection(
            instances=int(section.get('instances', IdentitiesSection.instances)),
            filter=list(flt),
        )

    @staticmethod
    def _parse_converge(section: Dict[str, Any]) -> ConvergeSection:
        converge = ConvergeSection()
        if 'x' in section:
            converge.x = parse_point(section['x'])
        if 'y' in section:
            converge.y = parse_point(section['y'])
        converge.s = float(section.get('s', converge.s))
        converge.t = float(section.get('t', converge.t))
        converge.mode = str(section.get('mode', converge.mode)).lower()
        for name in ('phi1', 'phi2', 'psi'):
            if name in section:
                setattr(converge, name, parse_mixture(section[name]))
        return converge

    @staticmethod
    def _parse_simulate(section: Dict[str, Any]) -> SimulateSection:
        sim = SimulateSection()
        sim.mode = str(section.get('mode', sim.mode)).lower()
        sim.L = int(section.get('L', sim.L))
        sim.n_paths = int(section.get('n_paths', sim.n_paths))
        sim.times = [float(t) for t in section.get('times', sim.times)]
        if 'points' in section:
            sim.points = [LatticePoint(int(p[0]), int(p[1])) for p in section['points']]
        sim.m0 = int(section.get('m0', sim.m0))
        sim.dump = str(section.get('dump', sim.dump)).lower()
        return sim

    @staticmethod
    def _parse_qgrowth(section: Dict[str, Any]) -> QgrowthSection:
        defaults = QgrowthSection()
        max_events = section.get('max_events', defaults.max_events)
        return QgrowthSection(
            L=int(section.get('L', defaults.L)),
            q=float(section.get('q', defaults.q)),
            horizon=float(section.get('horizon', defaults.horizon)),
            snapshots=int(section.get('snapshots', defaults.snapshots)),
            max_events=None if max_events is None else int(max_events),
        )

    @staticmethod
    def _parse_holder(section: Dict[str, Any]) -> HolderSection:
        holder = HolderSection()
        if 'phi' in section:
            holder.phi = parse_mixture(section['phi'])
        holder.s = float(section.get('s', holder.s))
        holder.gaps = [float(g) for g in section.get('gaps', holder.gaps)]
        holder.N = [int(n) for n in section.get('N', holder.N)]
        return holder


def parse_point(value: Any) -> Tuple[float, float]:
    """[x1, x2] or "x1,x2" as a point of the plane."""
    if isinstance(value, str):
        value = [part for part in value.split(',')]
    coords = [float(v) for v in value]
    if len(coords) != 2:
        raise ConfigurationError(f"A point needs two coordinates, got {value!r}")
    return (coords[0], coords[1])


def parse_mixture(value: Any) -> GaussianMixture:
    """
    Mixture from a list of {weight, center, width} mappings.

    Raises:
        ConfigurationError: If the list is empty or a term is malformed
    """
    if not isinstance(value, list) or not value:
        raise ConfigurationError("A mixture is a non-empty list of bumps")
    terms = []
    for item in value:
        if not isinstance(item, dict) or 'center' not in item:
            raise ConfigurationError(f"Malformed bump: {item!r}")
        terms.append(MixtureTerm(
            weight=float(item.get('weight', 1.0)),
            center=parse_point(item['center']),
            width=float(item.get('width', 1.0)),
        ))
    return GaussianMixture(tuple(terms))


def validate_config(config: ExperimentConfig) -> None:
    """
    Check cross-field constraints common to every command.

    Raises:
        ConfigurationError: On the first violated constraint
    """
    scaling = config.scaling
    if not scaling.N:
        raise ConfigurationError("scaling.N must list at least one level")
    try:
        scaling.schemes()
        [ScalingScheme(N=n, eta=scaling.eta) for n in config.holder.N]
    except ValueError as e:
        raise ConfigurationError(str(e))
    if not 0 < scaling.T0 < scaling.T1:
        raise ConfigurationError(f"Need 0 < T0 < T1, got T0={scaling.T0}, T1={scaling.T1}")
    if config.workers is not None and config.workers < 1:
        raise ConfigurationError(f"sweep.workers must be >= 1, got {config.workers}")
    if config.output.format not in OUTPUT_FORMATS:
        raise ConfigurationError(f"Unsupported output format: {config.output.format}")
    if config.converge.mode not in CONVERGE_MODES:
        raise ConfigurationError(f"Unsupported converge mode: {config.converge.mode}")
    if config.identities.instances < 1:
        raise ConfigurationError("identities.instances must be >= 1")

    sim = config.simulate
    if sim.mode not in SIMULATE_MODES:
        raise ConfigurationError(f"Unsupported simulate mode: {sim.mode}")
    if sim.dump not in DUMP_FORMATS:
        raise ConfigurationError(f"Unsupported dump format: {sim.dump}")
    if sim.n_paths < 1:
        raise ConfigurationError("simulate.n_paths must be >= 1")
    if not sim.times or any(t <= 0 for t in sim.times):
        raise ConfigurationError("simulate.times must be a non-empty list of positive times")
    if any(b <= a for a, b in zip(sim.times, sim.times[1:])):
        raise ConfigurationError("simulate.times must be strictly increasing")
    if sim.mode == 'euler' and any(p.a2 > sim.L for p in sim.points):
        raise ConfigurationError(f"simulate.points must lie in the lattice of size L={sim.L}")
    if sim.m0 < 0:
        raise ConfigurationError("simulate.m0 must be >= 0")

    qg = config.qgrowth
    if qg.L < 3:
        raise ConfigurationError(f"qgrowth.L must be >= 3, got {qg.L}")
    if not 0.0 <= qg.q < 1.0:
        raise ConfigurationError(f"qgrowth.q must be in [0, 1), got {qg.q}")
    if qg.horizon <= 0 or qg.snapshots < 2:
        raise ConfigurationError("qgrowth needs a positive horizon and at least two snapshots")

    holder = config.holder
    if not holder.gaps or any(g <= 0 for g in holder.gaps):
        raise ConfigurationError("holder.gaps must be positive")


def load_config(config_path: Optional[str] = None) -> ExperimentConfig:
    """
    Load configuration from file, or the defaults when no file is given.

    Args:
        config_path: Path to configuration file

    Returns:
        Effective ExperimentConfig
    """
    if config_path is None:
        return ConfigParser.parse_dict({})
    return ConfigParser.parse_file(config_path)


def create_example_config() -> Dict[str, Any]:
    """
    Create an example configuration dictionary.

    Returns:
        Example configuration with every section spelled out
    """
    return {
        'scaling': {
            'eta': 0.25,
            'N': [1024, 4096, 16384, 65536],
            'T0': 0.5,
            'T1': 2.0,
        },
        'quadrature': {
            'epsabs': 1e-11,
            'epsrel': 1e-9,
            'limit': 200,
            'r_max': 1e6,
            'failure_factor': 100.0,
            'spatial_nodes': 16,
        },
        'rng': {'seed': DEFAULT_SEED},
        'output': {'directory': 'results', 'format': 'csv'},
        'sweep': {'workers': 4},
        'identities': {'instances': 1000, 'filter': []},
        'converge': {
            'x': [0.0, 0.0], 's': 1.0,
            'y': [1.0, 1.0], 't': 2.0,
            'mode': 'both',
            'phi1': [
                {'weight': 1.0, 'center': [0.0, 0.0], 'width': 1.0},
                {'weight': -1.0, 'center': [1.0, 0.0], 'width': 1.0},
            ],
            'phi2': [
                {'weight': 1.0, 'center': [0.0, 1.0], 'width': 1.0},
                {'weight': -1.0, 'center': [1.0, 1.0], 'width': 1.0},
            ],
        },
        'simulate': {
            'mode': 'gaussian',
            'L': 3,
            'n_paths': 1000,
            'times': [1.0, 2.0],
            'points': [[1, 1], [2, 2]],
            'dump': 'csv',
        },
        'qgrowth': {'L': 5, 'q': 0.5, 'horizon': 10.0, 'snapshots': 101},
        'holder': {'s': 1.0, 'gaps': [0.2, 0.05, 0.0125], 'N': [1024, 4096, 16384]},
    }
