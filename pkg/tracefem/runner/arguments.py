"""
This module contains the command line parsers of the tracefem scripts.
Every flag that mirrors a config key overrides the config file; flags left unset keep the file value.
"""
import argparse

from config import VARIANTS

# Flag destination -> dotted config key.
CONFIG_FLAGS = {
    'problem': 'problem',
    'eps': 'eps',
    'variant': 'variant',
    'h0': 'mesh.h0',
    'levels': 'mesh.levels',
    'threads': 'threads',
    'output': 'output.directory',
    'method': 'solver.method',
    'steps': 'adapt.steps',
    'mode': 'adapt.mode',
    'alpha_g': 'adapt.alpha_g',
    'sweep_levels': 'converge.levels',
    'seed': 'seed',
}


def build_parser(prog: str, description: str) -> argparse.ArgumentParser:
    """
    Create a parser with the flags shared by all commands.
    """
    parser = argparse.ArgumentParser(prog=prog, description=description)
    parser.add_argument('-c', '--config',
                        help='Config file (TOML)',
                        action='store',
                        required=False,
                        default=None,
                        dest='config')
    parser.add_argument('-p', '--problem',
                        help='Builtin problem id (ex1 .. ex6, patch)',
                        action='store',
                        required=False,
                        default=None,
                        dest='problem')
    parser.add_argument('-e', '--eps',
                        help='Diffusion coefficient',
                        action='store',
                        required=False,
                        default=None,
                        type=float,
                        dest='eps')
    parser.add_argument('-H', '--h0',
                        help='Initial uniform cell size',
                        action='store',
                        required=False,
                        default=None,
                        type=float,
                        dest='h0')
    parser.add_argument('-l', '--levels',
                        help='Surface band refinements of the initial grid',
                        action='store',
                        required=False,
                        default=None,
                        type=int,
                        dest='levels')
    parser.add_argument('-t', '--threads',
                        help='Assembly worker threads (default: the hardware count)',
                        action='store',
                        required=False,
                        default=None,
                        type=int,
                        dest='threads')
    parser.add_argument('-o', '--output',
                        help='Output directory',
                        action='store',
                        required=False,
                        default=None,
                        dest='output')
    parser.add_argument('--dump-grid',
                        help='Write the grid as a VTK unstructured grid to this path',
                        action='store',
                        required=False,
                        default=None,
                        dest='dump_grid')
    parser.add_argument('--dump-surface',
                        help='Write the discrete surface as VTK polydata to this path',
                        action='store',
                        required=False,
                        default=None,
                        dest='dump_surface')
    parser.add_argument('--report',
                        help='Write the report CSV to this path',
                        action='store',
                        required=False,
                        default=None,
                        dest='report')
    return parser


def add_solver_arguments(parser: argparse.ArgumentParser):
    parser.add_argument('-v', '--variant',
                        help='Discretization variant',
                        action='store',
                        required=False,
                        default=None,
                        choices=VARIANTS,
                        dest='variant')
    parser.add_argument('-m', '--method',
                        help='Linear solver',
                        action='store',
                        required=False,
                        default=None,
                        choices=('direct', 'iterative', 'auto'),
                        dest='method')
    parser.add_argument('--dump-matrix',
                        help='Write the assembled matrix in MatrixMarket format to this path',
                        action='store',
                        required=False,
                        default=None,
                        dest='dump_matrix')


def solve_parser() -> argparse.ArgumentParser:
    parser = build_parser('tracefem solve', 'Solve a surface problem on one grid.')
    add_solver_arguments(parser)
    return parser


def converge_parser() -> argparse.ArgumentParser:
    parser = build_parser('tracefem converge', 'Run a uniform refinement sweep and report convergence orders.')
    add_solver_arguments(parser)
    parser.add_argument('-n', '--sweep-levels',
                        help='Number of grids of the sweep',
                        action='store',
                        required=False,
                        default=None,
                        type=int,
                        dest='sweep_levels')
    parser.add_argument('-b', '--both-variants',
                        help='Run the surface gradient and the full gradient variants',
                        action='store_true',
                        required=False,
                        default=False,
                        dest='both_variants')
    return parser


def adapt_parser() -> argparse.ArgumentParser:
    parser = build_parser('tracefem adapt', 'Run the adaptive refinement loop.')
    add_solver_arguments(parser)
    parser.add_argument('-s', '--steps',
                        help='Adaptive steps',
                        action='store',
                        required=False,
                        default=None,
                        type=int,
                        dest='steps')
    parser.add_argument('--mode',
                        help='Indicator weights',
                        action='store',
                        required=False,
                        default=None,
                        choices=('elliptic', 'advection'),
                        dest='mode')
    parser.add_argument('-g', '--alpha-g',
                        help='Weight of the geometric indicator',
                        action='store',
                        required=False,
                        default=None,
                        type=float,
                        dest='alpha_g')
    return parser


def shishkin_parser() -> argparse.ArgumentParser:
    parser = build_parser('tracefem shishkin', 'Solve on layer-fitted grids (or uniform grids) and report errors.')
    add_solver_arguments(parser)
    parser.add_argument('-u', '--uniform',
                        help='Use uniform band refinements instead of layer-fitted grids',
                        action='store_true',
                        required=False,
                        default=False,
                        dest='uniform')
    return parser


def extract_surface_parser() -> argparse.ArgumentParser:
    return build_parser('tracefem extract-surface', 'Extract the discrete surface and report its quality.')


def check_parser() -> argparse.ArgumentParser:
    parser = build_parser('tracefem check', 'Run the invariant audits on a config.')
    parser.add_argument('-r', '--seed',
                        help='Seed of the randomized audits',
                        action='store',
                        required=False,
                        default=None,
                        type=int,
                        dest='seed')
    parser.add_argument('-k', '--operations',
                        help='Random refinement operations of the balance audit',
                        action='store',
                        required=False,
                        default=20,
                        type=int,
                        dest='operations')
    return parser


def overrides(args: argparse.Namespace) -> dict:
    """
    Dotted config values given on the command line.
    """
    return {key: getattr(args, name) for name, key in CONFIG_FLAGS.items() if getattr(args, name, None) is not None}
