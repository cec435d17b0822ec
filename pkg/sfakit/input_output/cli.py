"""
Command line entry point

    sfakit <kind> --config run.ini [--out DIR] [--threads N] [--seed N] [--verbose] [--html]
    sfakit settings

Exit codes: 0 success, 2 configuration or domain error, 3 numerical
non-convergence or refinement, 4 I/O error.
"""
# Standard library imports
import argparse
import logging
import sys

# sfakit library imports
from sfakit.calculation_tools.errors import ConfigError, OutputError, SFAError
from sfakit.general_settings.settings import Settings
from sfakit.input_output.config import KINDS, parse_config
from sfakit.input_output.sfakit_io import Tee
from sfakit.main_modules.run_job import run_job

logger = logging.getLogger('CLILogger')

LOG_FORMAT = '%(asctime)s %(name)s %(levelname)s: %(message)s'


def build_parser():
    """The argument parser with one subcommand per job kind"""
    from sfakit import __version__ as version
    parser = argparse.ArgumentParser(prog='sfakit', description='Strong-field approximation toolkit')
    parser.add_argument('--version', action='version', version=f'%(prog)s {version}')
    commands = parser.add_subparsers(dest='command', metavar='command')
    commands.required = True

    for kind in KINDS:
        sub = commands.add_parser(kind, help=f'Run a {kind} job')
        sub.add_argument('--config', required=True, help='Run config (key = value, JSON or YAML)')
        sub.add_argument('--out', default=None, help='Output directory (overrides [run] out)')
        sub.add_argument('--threads', type=int, default=None, help='Worker threads')
        sub.add_argument('--seed', type=int, default=None, help='Seed recorded in the manifest')
        sub.add_argument('--verbose', action='store_true', default=None, help='Log at DEBUG level')
        sub.add_argument('--html', action='store_true', default=None, help='Also write an interactive HTML figure')

    sub = commands.add_parser('settings', help='Print the default settings')
    sub.add_argument('--section', default=None, help='Print one section only')
    return parser


def _configure_logging(verbose):
    handler = logging.StreamHandler(sys.stdout)
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    root = logging.getLogger()
    root.handlers = [handler]
    root.setLevel(logging.DEBUG if verbose else logging.INFO)
    return handler


def _print_settings(section):
    settings = Settings()
    if section is None:
        print(settings)
        return 0
    try:
        values = settings.section(section)
    except KeyError as e:
        print(e.args[0], file=sys.stderr)
        return 2
    for key, value in values.items():
        print(f'{str(key).rjust(25)} : {value}')
    return 0


def main(argv=None):
    """Runs the command line and returns the exit code"""
    args = build_parser().parse_args(argv)
    if args.command == 'settings':
        return _print_settings(args.section)

    overrides = {'out': args.out, 'threads': args.threads, 'seed': args.seed, 'verbose': args.verbose,
                 'html': args.html}
    try:
        config = parse_config(args.config, kind=args.command, overrides=overrides)
    except ConfigError as e:
        print(e, file=sys.stderr)
        return e.exit_code

    try:
        config.out_dir.mkdir(parents=True, exist_ok=True)
        with Tee(config.out_dir / 'run.log'):
            handler = _configure_logging(config.run.verbose)
            try:
                manifest = run_job(config)
            finally:
                logging.getLogger().removeHandler(handler)
    except OutputError as e:
        print(e, file=sys.stderr)
        return e.exit_code
    except OSError as e:
        print(f'I/O error: {e}', file=sys.stderr)
        return OutputError.exit_code
    except SFAError as e:
        print(e, file=sys.stderr)
        return e.exit_code

    if not manifest.ok:
        print(f"{manifest.failure['type']}: {manifest.failure['message']}", file=sys.stderr)
    return manifest.exit_code


if __name__ == '__main__':
    sys.exit(main())
