"""CLI for the curvlab laboratory.

Usage:
    curvlab verify --config run.json        # Bracket, involution and rank checks
    curvlab simulate --config run.json      # Integrate, write trajectory CSV + drift JSON
    curvlab curvature --config run.json     # Closed-form vs numeric curvature scan
    curvlab sweep --config run.json         # Parameter grid of drift summaries
    curvlab transform --config run.json     # Polar chart diagnostics
    curvlab schema                          # Print the config schema
"""

import argparse
import logging
import sys

from curvlab.cli import EXIT_CONFIG, EXIT_FAILED, EXIT_RUNTIME, curvature, simulate, sweep, transform, verify
from curvlab.config import load_config, schema_json
from curvlab.errors import ConfigError, ConvergenceError, DomainError, SingularConfigurationError

logger = logging.getLogger(__name__)

COMMANDS = {
    'verify': verify.run,
    'simulate': simulate.run,
    'curvature': curvature.run,
    'sweep': sweep.run,
    'transform': transform.run,
}


def setup_logging(quiet: bool = False, verbose: bool = False):
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(level=level, format='%(asctime)s - %(levelname)s - %(message)s')
    # jax logs backend selection at INFO
    logging.getLogger('jax').setLevel(max(level, logging.WARNING))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='curvlab',
        description='Deformed sl(2,R) coalgebra Hamiltonians: integrals, curvature and dynamics',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Commands:
  verify        Check the deformed algebra, universal integrals and ranks
  simulate      Integrate Hamilton's equations and monitor invariant drift
  curvature     Scan closed-form against numeric curvature
  sweep         Run a parameter grid of simulations (CURVLAB_THREADS caps workers)
  transform     Polar roundtrip, H~ = 2H and integral conversions
  schema        Print the JSON config schema

Exit codes:
  0 success, 1 check failed, 2 config/domain error, 3 singularity or Newton failure

Examples:
  curvlab verify --config configs/verify_type_i.json
  curvlab simulate --config configs/ms_sw.json --out-dir runs/
  curvlab sweep --config configs/sweep.json --workers 4 --quiet
""",
    )
    parser.add_argument('command', nargs='?', default='verify',
                        help='Command to execute')
    parser.add_argument('args', nargs='*', help='Command arguments')
    parser.add_argument('--config', '-c', help='JSON run configuration')
    parser.add_argument('--seed', type=int, default=None,
                        help='Override the config seed')
    parser.add_argument('--out-dir', default=None,
                        help='Directory for relative output paths')
    parser.add_argument('--workers', type=int, default=None,
                        help='Sweep worker threads')
    parser.add_argument('--quiet', '-q', action='store_true',
                        help='Only warnings; no progress bars')
    parser.add_argument('--verbose', '-v', action='store_true',
                        help='Debug logging')
    return parser


def main(argv=None) -> int:
    """Entry point for the curvlab command."""
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.quiet, args.verbose)

    if args.command == 'schema':
        print(schema_json())
        return 0

    handler = COMMANDS.get(args.command)
    if handler is None:
        print(f'ERROR: unknown command {args.command!r}', file=sys.stderr)
        parser.print_help(sys.stderr)
        return EXIT_CONFIG

    try:
        config = load_config(args.config).with_seed(args.seed)
    except ConfigError as e:
        print(f'ERROR: config: {e}', file=sys.stderr)
        return EXIT_CONFIG

    try:
        return handler(config, args)
    except (ConfigError, DomainError) as e:
        print(f'ERROR: {e}', file=sys.stderr)
        return EXIT_CONFIG
    except (SingularConfigurationError, ConvergenceError) as e:
        print(f'ERROR: {e}', file=sys.stderr)
        return EXIT_RUNTIME
    except ValueError as e:
        print(f'ERROR: invalid input: {e}', file=sys.stderr)
        return EXIT_CONFIG
    except KeyboardInterrupt:
        print('\nInterrupted', file=sys.stderr)
        return EXIT_FAILED


if __name__ == '__main__':
    sys.exit(main())
