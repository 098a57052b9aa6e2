"""
Command-line interface for the Whittaker SDE laboratory.
"""
import argparse
import dataclasses
import logging
import sys
from typing import List, Optional

import structlog

from whitlab import __version__
from whitlab.cli_commands import COMMANDS
from whitlab.config import ExperimentConfig, load_config
from whitlab.config.parser import (
    DUMP_FORMATS,
    SIMULATE_MODES,
    parse_point,
    validate_config,
)
from whitlab.core.elements import LatticePoint
from whitlab.core.identity_validator import available_suites
from whitlab.errors import (
    ConfigurationError,
    FactorizationError,
    InterlacingError,
    QuadratureError,
)

logger = structlog.get_logger(__name__)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIGURATION = 2
EXIT_NUMERICAL = 3


def _csv_list(cast):
    """argparse type for comma-separated lists."""
    def parse(text: str) -> list:
        return [cast(part) for part in text.split(',') if part.strip()]
    return parse


def _lattice_point(text: str) -> LatticePoint:
    a1, a2 = (int(v) for v in text.split(','))
    return LatticePoint(a1, a2)


class WhitLabCLI:
    """
    Command-line interface for the laboratory.
    """

    def __init__(self) -> None:
        """Initialize CLI."""
        self.config: Optional[ExperimentConfig] = None

    def _common_parser(self) -> argparse.ArgumentParser:
        """Flags shared by every command."""
        common = argparse.ArgumentParser(add_help=False)

        # Configuration
        common.add_argument('-c', '--config', metavar='FILE', help='Experiment file (YAML)')
        common.add_argument('-o', '--output-dir', metavar='DIR',
                            help='Output directory (default: $WHITLAB_OUTPUT_DIR or ./results)')
        common.add_argument('--seed', type=int, help='Root seed of all random streams')
        common.add_argument('--workers', type=int, metavar='N',
                            help='Sweep process-pool size (default: available CPUs)')

        # Scaling
        common.add_argument('--eta', type=float, help='Cutoff exponent in (0, 1/2)')
        common.add_argument('--N', type=_csv_list(int), metavar='N1,N2,...',
                            help='Rescaling levels')
        common.add_argument('--T0', type=float, help='Lower end of the time window')
        common.add_argument('--T1', type=float, help='Upper end of the time window')

        # Quadrature
        common.add_argument('--epsabs', type=float, help='Absolute quadrature tolerance')
        common.add_argument('--epsrel', type=float, help='Relative quadrature tolerance')
        common.add_argument('--r-max', type=float, help='Truncation point of the c1 integral')
        common.add_argument('--spatial-nodes', type=int, help='Gauss-Hermite nodes per coordinate')
        common.add_argument('--audit-log', metavar='FILE',
                            help='Append every audited integral to this JSON-lines file')

        # Output format
        fmt = common.add_mutually_exclusive_group()
        fmt.add_argument('--csv', dest='format', action='store_const', const='csv',
                         help='Write tables as CSV (default)')
        fmt.add_argument('--json', dest='format', action='store_const', const='json',
                         help='Write tables as JSON')

        # Verbosity
        common.add_argument('-v', '--verbose', action='count', default=0,
                            help='Increase verbosity (-v for debug events)')
        common.add_argument('-q', '--quiet', action='store_true',
                            help='Quiet mode (warnings and errors only)')
        return common

    def build_parser(self) -> argparse.ArgumentParser:
        common = self._common_parser()
        parser = argparse.ArgumentParser(
            prog='whitlab',
            description='Whittaker SDE numerical laboratory',
            formatter_class=argparse.RawDescriptionHelpFormatter,
            epilog='''
Examples:
  # Run every exact-identity suite
  whitlab identities

  # Only the shift identities, JSON summary in ./out
  whitlab identities --filter shift -o out

  # Pointwise and weak-form convergence sweeps on four levels
  whitlab converge --N 1024,4096,16384,65536

  # Only the weak-form sweep, mixtures from a config file
  whitlab converge --weak -c experiment.yaml

  # Re-centering constants with their audit trail
  whitlab c1 --json
  whitlab kappa0 --csv

  # q-Whittaker growth, binary trajectory dump
  whitlab qgrowth --L 5 --q 0.5 --horizon 10 --dump binary
            '''
        )
        parser.add_argument('--version', action='version', version=f'python-whitlab {__version__}')
        sub = parser.add_subparsers(dest='command', metavar='COMMAND')

        ident = sub.add_parser('identities', parents=[common], help='Run the exact-identity suites')
        ident.add_argument('--filter', type=_csv_list(str), metavar='SUITE[,SUITE]',
                           help=f"Suites to run ({', '.join(available_suites())})")
        ident.add_argument('--instances', type=int, help='Randomized instances per suite')
        ident.add_argument('--inject-fault', nargs='?', const='semigroup', default=None,
                           help=argparse.SUPPRESS)

        conv = sub.add_parser('converge', parents=[common], help='N-sweep against the limit covariance')
        only = conv.add_mutually_exclusive_group()
        only.add_argument('--point', dest='converge_mode', action='store_const', const='point',
                          help='Only the point-pair sweep')
        only.add_argument('--weak', dest='converge_mode', action='store_const', const='weak',
                          help='Only the mixture-pair sweep')
        conv.add_argument('--x', type=parse_point, metavar='X1,X2', help='Space point at time s')
        conv.add_argument('--s', type=float, help='Earlier time')
        conv.add_argument('--y', type=parse_point, metavar='Y1,Y2', help='Space point at time t')
        conv.add_argument('--t', type=float, help='Later time')

        sub.add_parser('c1', parents=[common], help='Compute the re-centering constant c1')
        sub.add_parser('kappa0', parents=[common], help='Compute the constant kappa0')

        sim = sub.add_parser('simulate', parents=[common], help='Monte Carlo cross-validation')
        sim.add_argument('--mode', choices=SIMULATE_MODES, help='Sampler')
        sim.add_argument('--L', type=int, help='Lattice truncation (euler mode)')
        sim.add_argument('--paths', type=int, help='Number of paths')
        sim.add_argument('--times', type=_csv_list(float), metavar='T1,T2,...', help='Sampling times')
        sim.add_argument('--points', type=_lattice_point, nargs='+', metavar='A1,A2',
                         help='Lattice points of the covariance table')
        sim.add_argument('--m0', type=int, help='Initial state (death mode)')
        sim.add_argument('--dump', choices=DUMP_FORMATS, help='Trajectory dump format')

        qg = sub.add_parser('qgrowth', parents=[common], help='q-Whittaker particle system')
        qg.add_argument('--L', type=int, help='Lattice truncation')
        qg.add_argument('--q', type=float, help='Parameter in [0, 1)')
        qg.add_argument('--horizon', type=float, help='Final time')
        qg.add_argument('--snapshots', type=int, help='Number of snapshot times')
        qg.add_argument('--max-events', type=int, help='Stop after this many events')
        qg.add_argument('--dump', choices=DUMP_FORMATS, help='Trajectory dump format')

        hold = sub.add_parser('holder', parents=[common], help='Hoelder decomposition scan')
        hold.add_argument('--s', type=float, help='Earlier time of every cell')
        hold.add_argument('--gaps', type=_csv_list(float), metavar='G1,G2,...', help='Values of t - s')
        hold.add_argument('--levels', type=_csv_list(int), metavar='N1,N2,...',
                          help='Rescaling levels of the scan')

        sub.add_parser('example-config', parents=[common], help='Print an example experiment file')
        return parser

    def parse_args(self, args: Optional[List[str]] = None) -> argparse.Namespace:
        """
        Parse command-line arguments.

        Args:
            args: Command-line arguments (default: sys.argv[1:])

        Returns:
            Parsed arguments
        """
        return self.build_parser().parse_args(args)

    def setup_logging(self, args: argparse.Namespace) -> None:
        """
        Setup logging based on verbosity.

        Args:
            args: Parsed arguments
        """
        if getattr(args, 'quiet', False):
            level = logging.WARNING
        elif getattr(args, 'verbose', 0) >= 1:
            level = logging.DEBUG
        else:
            level = logging.INFO

        structlog.configure(wrapper_class=structlog.make_filtering_bound_logger(level))

    def apply_overrides(self, config: ExperimentConfig, args: argparse.Namespace) -> ExperimentConfig:
        """
        Apply command-line flags on top of the file configuration.

        Raises:
            ConfigurationError: If the combined configuration is invalid
        """
        def given(name: str) -> bool:
            return getattr(args, name, None) is not None

        if given('output_dir'):
            config.output.directory = args.output_dir
        if given('format'):
            config.output.format = args.format
        if given('seed'):
            config.seed = args.seed
        if given('workers'):
            config.workers = args.workers

        if given('eta'):
            config.scaling.eta = args.eta
        if given('N'):
            config.scaling.N = args.N
        if given('T0'):
            config.scaling.T0 = args.T0
        if given('T1'):
            config.scaling.T1 = args.T1

        quad_changes = {
            key: getattr(args, key)
            for key in ('epsabs', 'epsrel', 'r_max', 'spatial_nodes')
            if given(key)
        }
        if quad_changes:
            try:
                config.quadrature = dataclasses.replace(config.quadrature, **quad_changes)
            except ValueError as e:
                raise ConfigurationError(str(e))

        command = getattr(args, 'command', None)
        if command == 'identities':
            if given('filter'):
                config.identities.filter = args.filter
            if given('instances'):
                config.identities.instances = args.instances
        elif command == 'converge':
            for name in ('x', 'y', 's', 't'):
                if given(name):
                    setattr(config.converge, name, getattr(args, name))
            if given('converge_mode'):
                config.converge.mode = args.converge_mode
        elif command == 'simulate':
            for flag, name in (('mode', 'mode'), ('L', 'L'), ('paths', 'n_paths'),
                               ('times', 'times'), ('points', 'points'),
                               ('m0', 'm0'), ('dump', 'dump')):
                if given(flag):
                    setattr(config.simulate, name, getattr(args, flag))
        elif command == 'qgrowth':
            for name in ('L', 'q', 'horizon', 'snapshots', 'max_events'):
                if given(name):
                    setattr(config.qgrowth, name, getattr(args, name))
            if given('dump'):
                config.simulate.dump = args.dump
        elif command == 'holder':
            if given('s'):
                config.holder.s = args.s
            if given('gaps'):
                config.holder.gaps = args.gaps
            if given('levels'):
                config.holder.N = args.levels

        validate_config(config)
        return config

    def run(self, args: Optional[List[str]] = None) -> int:
        """
        Run one command.

        Args:
            args: Command-line arguments

        Returns:
            Exit code (0 success, 1 check failure, 2 configuration error,
            3 numerical non-convergence)
        """
        try:
            parsed_args = self.parse_args(args)
        except SystemExit as e:
            return EXIT_OK if e.code in (0, None) else EXIT_CONFIGURATION

        if not parsed_args.command:
            self.build_parser().print_help()
            return EXIT_CONFIGURATION

        self.setup_logging(parsed_args)

        try:
            config = load_config(parsed_args.config)
            self.config = self.apply_overrides(config, parsed_args)
            logger.info(
                "Configuration loaded",
                command=parsed_args.command,
                config_sha256=self.config.config_hash(),
                output_dir=self.config.output.directory,
            )
            return COMMANDS[parsed_args.command](self.config, parsed_args)

        except FileNotFoundError as e:
            logger.error("Configuration file not found", error=str(e))
            return EXIT_CONFIGURATION
        except (QuadratureError, FactorizationError) as e:
            logger.error("Numerical failure", error=str(e))
            return EXIT_NUMERICAL
        except InterlacingError as e:
            logger.error("Invariant violated", error=str(e), events=len(e.events))
            return EXIT_CHECK_FAILED
        except ValueError as e:
            logger.error("Configuration error", error=str(e))
            return EXIT_CONFIGURATION
        except Exception as e:
            logger.error("Unexpected error", error=str(e), exc_info=True)
            return EXIT_CHECK_FAILED


def main() -> int:
    """
    Main entry point for command-line interface.

    Returns:
        Exit code
    """
    cli = WhitLabCLI()
    return cli.run()


if __name__ == '__main__':
    sys.exit(main())
