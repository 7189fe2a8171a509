"""
This module contains the bodies of the tracefem commands. Each command loads the config, runs, writes its
artifacts and the run manifest, and returns the process exit code: 0 on success, 1 on a numeric failure,
2 on a usage error.
"""
import argparse
import time
from typing import Callable

import numpy as np

import config
from tracefem.adapt.loop import AdaptControls, adapt_loop
from tracefem.analysis.eoc import eoc_rows, eoc_table, eoc_rates
from tracefem.analysis.norms import error_norms, restricted_error, exterior_region
from tracefem.analysis.shishkin import build_shishkin_grid, shishkin_sequence
from tracefem.errors import ConfigError, TraceFemError, InsufficientLevels, EmptyRegion, AuditFailure
from tracefem.fem.quadrature import triangle_rule, MAX_DEGREE
from tracefem.geometry.problem import builtin_problem
from tracefem.io.report import write_csv, write_manifest, dump_matrix
from tracefem.io.vtk import write_grid, write_surface
from tracefem.mesh.marching import extract_surface
from tracefem.mesh.octree import refine, refine_band, audit_balance, audit_tiling
from tracefem.mesh.quality import geometry_quality, audit_watertight, audit_containment, audit_orientation, \
    max_vertex_value
from tracefem.mesh.trilinear import interpolate_levelset, continuity_defect
from tracefem.pipeline import SolverSettings, initial_grid, solve_on_grid
from tracefem.runner.arguments import overrides
from tracefem.utils import logging, write_lines


class Run:
    """
    Artifacts, timings and summary values collected by a command body.
    """

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.artifacts: list[str] = []
        self.timings: dict[str, float] = {}
        self.summary: dict = {}
        self.metadata: dict = {'linf_sampling': 'max over triangle quadrature points'}

    def artifact(self, path: str) -> str:
        self.artifacts.append(path)
        return path


def run_command(command: str, body: Callable[[Run], None], args: argparse.Namespace,
                defaults: dict | None = None) -> int:
    """
    Load the config, run a command body and write the manifest.
    returns:
        The exit code.
    """
    run = Run(args)
    try:
        config.load(args.config, overrides(args), defaults)
        if getattr(args, 'both_variants', False):
            config.values['converge.variants'] = ['surface_gradient', 'full_gradient']
        config.check_output_directory()
    except ConfigError as e:
        logging.error(f'{command}: {e}')
        return 2
    start = time.perf_counter()
    error, code = None, 0
    try:
        body(run)
    except ConfigError as e:
        logging.error(f'{command}: {e}')
        error, code = e, 2
    except TraceFemError as e:
        logging.error(f'{command} failed: {e}')
        error, code = e, 1
    except (ArithmeticError, RuntimeError, ValueError) as e:
        # numpy and scipy failures (LinAlgError, factorization errors) are numeric failures too
        logging.exception(f'{command} failed in a library call: {e}')
        error, code = e, 1
    run.timings['total'] = time.perf_counter() - start
    write_manifest(config.manifest_path, command, config.values, run.artifacts, run.timings, error, run.summary,
                   run.metadata)
    return code


def _problem():
    return builtin_problem(config.values['problem'], **config.problem_params())


def _initial_grid(problem):
    values = config.values
    return initial_grid(problem, values['mesh.h0'], values['mesh.levels'], values['mesh.level_cap'],
                        config.domain_box())


def _report_path(run: Run) -> str:
    return run.args.report or config.report_csv_path


def _exterior_row(result, problem, rule) -> dict:
    threshold = config.values['report.exterior_abs_x3']
    if threshold <= 0.0 or not problem.has_exact_solution:
        return {}
    try:
        report = restricted_error(result.u, problem, result.tri, result.dofs, exterior_region(threshold), rule,
                                  'exterior')
    except EmptyRegion as e:
        logging.warning(f'Restricted norms skipped: {e}')
        return {}
    return {'ext_l2': report.l2, 'ext_h1': report.h1, 'ext_linf': report.linf}


def _write_dumps(run: Run, result):
    if run.args.dump_grid:
        run.artifact(write_grid(run.args.dump_grid, result.grid))
    if getattr(run.args, 'dump_matrix', None):
        run.artifact(dump_matrix(run.args.dump_matrix, result.system.matrix))


def solve_body(run: Run):
    problem = _problem()
    settings = SolverSettings.from_config(config.values)
    rule = triangle_rule(settings.degree)
    result = solve_on_grid(problem, _initial_grid(problem), settings)
    run.timings.update(result.timings)
    row = {'problem': problem.problem_id, 'variant': settings.variant, 'dofs': len(result.dofs),
           'triangles': len(result.tri), 'area': result.tri.total_area, 'residual': result.report.residual}
    if problem.has_exact_solution:
        report = error_norms(result.u, problem, result.tri, result.dofs, rule)
        row.update(h=report.h_max, l2=report.l2, h1_semi=report.h1_semi, h1=report.h1, linf=report.linf)
        row.update(_exterior_row(result, problem, rule))
    else:
        row.update(mean=float(result.system.moments @ result.u) / result.tri.total_area,
                   max_abs=float(np.max(np.abs(result.u))))
    run.artifact(write_csv(_report_path(run), [row]))
    run.artifact(write_surface(run.args.dump_surface or config.surface_vtk_path, result.tri,
                               result.vertex_values()))
    _write_dumps(run, result)
    run.summary.update(row)


def converge_body(run: Run):
    values = config.values
    levels = values['converge.levels']
    if levels < 2:
        raise InsufficientLevels(f'A convergence sweep needs at least 2 levels : "{levels}"')
    problem = _problem()
    rule = triangle_rule(values['quadrature.degree'])
    rows, lines = [], []
    for variant in values['converge.variants']:
        settings = SolverSettings.from_config(values, variant)
        grid = _initial_grid(problem)
        reports = []
        for level in range(levels):
            if level:
                grid = refine_band(grid, problem.level_set)
            result = solve_on_grid(problem, grid, settings)
            reports.append(error_norms(result.u, problem, result.tri, result.dofs, rule))
            logging.info(f'{variant} level {level}: {reports[-1].dofs} dofs, L2 error {reports[-1].l2:.3e}')
        rows += eoc_rows(reports, variant, 'h')
        lines += list(eoc_table(reports, 'h', f'{problem.problem_id} {variant}')) + ['']
        run.summary[variant] = {'dofs': [report.dofs for report in reports],
                                'l2_rates': eoc_rates(reports, 'l2'),
                                'linf_rates': eoc_rates(reports, 'linf')}
    run.artifact(write_csv(_report_path(run), rows))
    run.artifact(write_lines(config.table_path, lines))
    print('\n'.join(lines))


def adapt_body(run: Run):
    problem = _problem()
    controls = AdaptControls.from_config(config.values)
    rows, reports, last = [], [], None
    for step in adapt_loop(problem, controls, box=config.domain_box()):
        rows.append(step.as_row())
        write_csv(_report_path(run), rows)
        if not step.step:
            run.artifact(_report_path(run))
        if step.report is not None:
            reports.append(step.report)
        last = step
    run.artifact(write_surface(run.args.dump_surface or config.surface_vtk_path, last.result.tri,
                               last.result.vertex_values()))
    _write_dumps(run, last.result)
    if len(reports) >= 2:
        lines = list(eoc_table(reports, 'dofs', f'{problem.problem_id} adaptive'))
        run.artifact(write_lines(config.table_path, lines))
        print('\n'.join(lines))
    run.summary.update(steps=len(rows), dofs=last.dofs, eta=last.eta)


def shishkin_body(run: Run):
    values = config.values
    problem = _problem()
    settings = SolverSettings.from_config(values)
    rule = triangle_rule(settings.degree)
    if run.args.uniform:
        base = _initial_grid(problem)
    else:
        base = build_shishkin_grid(config.domain_box() or problem.box, values['shishkin.band_halfwidth'],
                                   values['shishkin.h_min'], values['shishkin.h_max'], problem.level_set,
                                   values['mesh.level_cap'])
    rows, reports, result = [], [], None
    for level, grid in enumerate(shishkin_sequence(base, problem.level_set, values['shishkin.refinements'])):
        result = solve_on_grid(problem, grid, settings)
        report = error_norms(result.u, problem, result.tri, result.dofs, rule)
        reports.append(report)
        vertex_values = result.vertex_values()
        exact = problem.exact_solution(rule.physical_points(result.tri.corners).reshape(-1, 3))
        row = {'level': level, **report.as_row(), **_exterior_row(result, problem, rule),
               'overshoot': float(np.max(np.abs(vertex_values)) / np.max(np.abs(exact)))}
        rows.append(row)
    rates = {norm: eoc_rates(reports, norm) for norm in ('l2', 'h1', 'linf')}
    for n, row in enumerate(rows):
        row.update({f'{norm}_rate': '' if rates[norm][n] is None else rates[norm][n] for norm in rates})
    lines = list(eoc_table(reports, 'h', f'{problem.problem_id} {"uniform" if run.args.uniform else "shishkin"}'))
    run.artifact(write_csv(_report_path(run), rows))
    run.artifact(write_lines(config.table_path, lines))
    run.artifact(write_surface(run.args.dump_surface or config.surface_vtk_path, result.tri,
                               result.vertex_values()))
    _write_dumps(run, result)
    run.summary.update(dofs=[report.dofs for report in reports], rates=rates)
    print('\n'.join(lines))


def extract_surface_body(run: Run):
    problem = _problem()
    grid = _initial_grid(problem)
    field = interpolate_levelset(grid, problem.level_set)
    tri = extract_surface(grid, field)
    quality = geometry_quality(tri, problem.level_set)
    row = {'leaves': len(grid), 'triangles': len(tri), 'vertices': len(tri.vertices), 'area': tri.total_area,
           'euler': tri.euler_characteristic, 'max_distance': quality.max_distance,
           'max_normal_error': quality.max_normal_error, 'max_per_cell': int(tri.triangles_per_cell().max())}
    run.artifact(write_surface(run.args.dump_surface or config.surface_vtk_path, tri))
    if run.args.dump_grid:
        run.artifact(write_grid(run.args.dump_grid, grid))
    run.artifact(write_csv(_report_path(run), [row]))
    run.summary.update(row)


def check_body(run: Run):
    values = config.values
    rng = np.random.default_rng(values['seed'])
    problem = _problem()
    grid = _initial_grid(problem)
    rows = []

    def audit(name: str, value, passed: bool):
        rows.append({'audit': name, 'value': value, 'passed': passed})
        logging.info(f'{name}: {value} ({"ok" if passed else "FAILED"})')

    balanced = True
    for _ in range(run.args.operations):
        count = min(8, len(grid))
        marks = [grid.leaves[n] for n in rng.choice(len(grid), size=count, replace=False)]
        marks = [key for key in marks if key.level < values['mesh.level_cap'] - 1]
        grid = refine(grid, marks)
        balanced &= not audit_balance(grid)
    audit('balance', len(grid), balanced)
    volume, overlaps = audit_tiling(grid)
    audit('tiling', volume, overlaps == 0 and abs(volume - (grid.upper - grid.lower) ** 3) <= 1e-9 * volume)

    field = interpolate_levelset(grid, problem.level_set)
    defect = continuity_defect(field)
    audit('continuity', defect, defect <= 1e-13 * max(1.0, float(np.abs(field.values).max())))
    tri = extract_surface(grid, field)
    audit('watertight', len(tri), audit_watertight(tri))
    audit('containment', len(tri), audit_containment(tri))
    audit('orientation', len(tri), audit_orientation(tri, field))
    audit('vertices', max_vertex_value(tri, field), max_vertex_value(tri, field) <= 1e-10)
    audit('euler', tri.euler_characteristic, tri.euler_characteristic % 2 == 0)

    for degree in range(1, MAX_DEGREE + 1):
        rule = triangle_rule(degree)
        worst = max(rule.monomial_error(a, total - a) for total in range(degree + 1) for a in range(total + 1))
        audit(f'quadrature_{degree}', worst, worst <= 1e-12)

    patch = builtin_problem('patch', surface=values['surface'])
    result = solve_on_grid(patch, grid if patch.box == problem.box else _initial_grid(patch),
                           SolverSettings.from_config(values, 'surface_gradient'))
    defect = float(np.max(np.abs(result.u - 1.0)))
    audit('patch', defect, defect <= 1e-8)

    run.artifact(write_csv(_report_path(run), rows))
    failed = [row['audit'] for row in rows if not row['passed']]
    run.summary.update(audits=len(rows), failed=failed)
    if failed:
        raise AuditFailure(f'Audits failed : "{", ".join(failed)}"')


def cmd_solve(args: argparse.Namespace) -> int:
    return run_command('solve', solve_body, args)


def cmd_converge(args: argparse.Namespace) -> int:
    return run_command('converge', converge_body, args)


def cmd_adapt(args: argparse.Namespace) -> int:
    return run_command('adapt', adapt_body, args)


def cmd_shishkin(args: argparse.Namespace) -> int:
    return run_command('shishkin', shishkin_body, args, {'problem': 'ex6', 'variant': 'supg'})


def cmd_extract_surface(args: argparse.Namespace) -> int:
    return run_command('extract-surface', extract_surface_body, args)


def cmd_check(args: argparse.Namespace) -> int:
    return run_command('check', check_body, args)
