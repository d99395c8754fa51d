import argparse
import sys

from tvwave import logger
from tvwave.run import adjoint_test, generate_data, solve
from tvwave.scenario.config import ScenarioConfig
from tvwave.scenario.presets import PRESETS
from tvwave.utils.base_logger import set_verbosity
from tvwave.utils.errors import ValidationError

EXIT_OK = 0
EXIT_FAILED_CHECK = 1
EXIT_NOT_CONVERGED = 2
EXIT_INVALID = 3


def load_config(args):
    if args.config is None and args.preset is None:
        raise ValidationError('Pass either --config or --preset.')
    if args.config is not None and args.preset is not None:
        raise ValidationError('Pass only one of --config and --preset.')
    config = ScenarioConfig.from_yaml(args.config) if args.config else ScenarioConfig.preset(args.preset)
    return config.with_overrides(seed=args.seed, max_iter=getattr(args, 'max_iter', None),
                                 tol=getattr(args, 'tol', None), alpha=getattr(args, 'alpha', None),
                                 beta=getattr(args, 'beta', None))


def cmd_generate_data(args):
    generate_data(load_config(args), args.out)
    return EXIT_OK


def cmd_solve(args):
    reconstructing = solve(load_config(args), args.data, args.out)
    if not reconstructing.result.converged:
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def cmd_adjoint_test(args):
    testing = adjoint_test(load_config(args), seed=args.seed or 0, corrupt_adjoint=args.corrupt_adjoint)
    print(testing.report.to_string(index=False))
    return EXIT_OK if testing.passed else EXIT_FAILED_CHECK


def cmd_write_preset(args):
    text = ScenarioConfig.preset(args.name).to_yaml(args.out)
    if args.out is None:
        print(text, end='')
    return EXIT_OK


def _add_config_arguments(parser):
    parser.add_argument('--config', default=None, help='Scenario YAML file.')
    parser.add_argument('--preset', default=None, choices=sorted(PRESETS), help='Named scenario instead of a file.')
    parser.add_argument('--seed', type=int, default=None, help='Override the noise seed.')


def _add_solver_arguments(parser):
    parser.add_argument('--max-iter', dest='max_iter', type=int, default=None, help='Override solver.max_iter.')
    parser.add_argument('--tol', type=float, default=None, help='Override solver.tol.')
    parser.add_argument('--alpha', type=float, default=None, help='Override the multi-bang weight.')
    parser.add_argument('--beta', type=float, default=None, help='Override the total-variation weight.')


def build_parser():
    parser = argparse.ArgumentParser(prog='tvwave', description='Wave-speed coefficient reconstruction with '
                                                                'multi-bang and total-variation regularization.')
    parser.add_argument('--verbose', action='store_true', help='Log debug messages.')
    subparsers = parser.add_subparsers(dest='command', required=True)

    generate = subparsers.add_parser('generate-data', help='Create synthetic measurements.')
    _add_config_arguments(generate)
    generate.add_argument('--out', required=True, help='Output directory for the data files.')
    generate.set_defaults(func=cmd_generate_data)

    solve_parser = subparsers.add_parser('solve', help='Reconstruct the coefficient from measurements.')
    _add_config_arguments(solve_parser)
    _add_solver_arguments(solve_parser)
    solve_parser.add_argument('--data', required=True, help='Directory written by generate-data.')
    solve_parser.add_argument('--out', required=True, help='Output directory for the reconstruction.')
    solve_parser.set_defaults(func=cmd_solve)

    check = subparsers.add_parser('adjoint-test', help='Check derivative and adjoint consistency.')
    _add_config_arguments(check)
    check.add_argument('--corrupt-adjoint', dest='corrupt_adjoint', action='store_true',
                       help='Perturb the adjoint derivative; the report must show FAIL rows.')
    check.set_defaults(func=cmd_adjoint_test)

    preset = subparsers.add_parser('write-preset', help='Write a named scenario as YAML.')
    preset.add_argument('name', choices=sorted(PRESETS))
    preset.add_argument('--out', default=None, help='Target file; stdout if omitted.')
    preset.set_defaults(func=cmd_write_preset)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    set_verbosity(args.verbose)
    try:
        return args.func(args)
    except ValidationError as e:
        logger.error(f'Invalid input: {e}')
        return EXIT_INVALID


def run_cli():
    sys.exit(main())


if __name__ == "__main__":
    run_cli()
