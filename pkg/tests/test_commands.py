import csv
import json

import pytest

from tracefem.runner import arguments, commands


def _run(command, parser, argv):
    return command(parser.parse_args(argv))


def _read_csv(path):
    with open(path, encoding='utf-8') as file:
        return list(csv.DictReader(file))


def test_invalid_variant_is_a_usage_error():
    with pytest.raises(SystemExit) as info:
        arguments.solve_parser().parse_args(['--variant', 'upwind'])
    assert info.value.code == 2


def test_overrides_map_flags_to_config_keys():
    args = arguments.adapt_parser().parse_args(['-p', 'ex5', '-s', '3', '--mode', 'advection', '-o', 'runs'])
    assert arguments.overrides(args) == {'problem': 'ex5', 'adapt.steps': 3, 'adapt.mode': 'advection',
                                         'output.directory': 'runs'}


def test_solve_writes_artifacts(tmp_path):
    output = tmp_path / 'solve'
    code = _run(commands.cmd_solve, arguments.solve_parser(),
                ['-p', 'patch', '-H', '0.5', '-o', str(output), '--dump-grid', str(output / 'grid.vtk'),
                 '--dump-matrix', str(output / 'matrix')])
    assert code == 0
    manifest = json.loads((output / 'manifest.json').read_text(encoding='utf-8'))
    assert manifest['command'] == 'solve'
    assert manifest['error'] is None
    assert manifest['config']['problem'] == 'patch'
    assert str(output / 'matrix.mtx') in manifest['artifacts']
    assert (output / 'surface.vtk').read_text(encoding='utf-8').startswith('# vtk DataFile Version 2.0')
    assert (output / 'grid.vtk').exists()
    row = _read_csv(output / 'report.csv')[0]
    assert row['problem'] == 'patch'
    assert float(row['linf']) <= 1e-8


def test_converge_needs_two_levels(tmp_path):
    code = _run(commands.cmd_converge, arguments.converge_parser(), ['-n', '1', '-o', str(tmp_path)])
    assert code == 2


def test_converge_table(tmp_path):
    code = _run(commands.cmd_converge, arguments.converge_parser(),
                ['-p', 'ex1', '-H', '0.5', '-n', '2', '-o', str(tmp_path)])
    assert code == 0
    rows = _read_csv(tmp_path / 'report.csv')
    assert [row['level'] for row in rows] == ['0', '1']
    assert rows[0]['l2_rate'] == ''
    assert float(rows[1]['l2_rate']) > 1.0
    assert '#d.o.f.' in (tmp_path / 'table.txt').read_text(encoding='utf-8')


def test_missing_config_file(tmp_path):
    code = _run(commands.cmd_solve, arguments.solve_parser(), ['-c', str(tmp_path / 'nope.toml')])
    assert code == 2


def test_numeric_failure_writes_manifest(tmp_path):
    config_path = tmp_path / 'run.toml'
    config_path.write_text('[domain]\nlower = 5.0\nupper = 6.0\n', encoding='utf-8')
    code = _run(commands.cmd_solve, arguments.solve_parser(),
                ['-c', str(config_path), '-H', '0.5', '-o', str(tmp_path)])
    assert code == 1
    manifest = json.loads((tmp_path / 'manifest.json').read_text(encoding='utf-8'))
    assert manifest['error']['type'] == 'EmptyBand'


def test_extract_surface_command(tmp_path):
    code = _run(commands.cmd_extract_surface, arguments.extract_surface_parser(), ['-H', '0.5', '-o', str(tmp_path)])
    assert code == 0
    row = _read_csv(tmp_path / 'report.csv')[0]
    assert row['euler'] == '2'
    assert (tmp_path / 'surface.vtk').exists()


def test_check_command(tmp_path):
    code = _run(commands.cmd_check, arguments.check_parser(), ['-H', '0.5', '-k', '1', '-o', str(tmp_path)])
    assert code == 0
    rows = _read_csv(tmp_path / 'report.csv')
    assert all(row['passed'] == 'True' for row in rows)
    assert {'balance', 'tiling', 'watertight', 'patch', 'quadrature_7'} <= {row['audit'] for row in rows}


def test_converge_rates_on_the_sphere(tmp_path):
    code = _run(commands.cmd_converge, arguments.converge_parser(),
                ['-p', 'ex1', '-H', '0.25', '-n', '3', '-o', str(tmp_path)])
    assert code == 0
    rows = _read_csv(tmp_path / 'report.csv')
    assert len(rows) == 3
    for row in rows[1:]:
        assert float(row['l2_rate']) == pytest.approx(2.0, abs=0.3)
        assert float(row['h1_rate']) == pytest.approx(1.0, abs=0.3)


def test_invalid_strip_is_a_config_error(tmp_path):
    config_path = tmp_path / 'strip.toml'
    config_path.write_text('[shishkin]\nband_halfwidth = 0.001\nh_min = 0.125\n', encoding='utf-8')
    code = _run(commands.cmd_shishkin, arguments.shishkin_parser(), ['-c', str(config_path), '-o', str(tmp_path)])
    assert code == 2
    manifest = json.loads((tmp_path / 'manifest.json').read_text(encoding='utf-8'))
    assert manifest['error']['type'] == 'InvalidStrip'


def test_adapt_stops_at_the_level_cap(tmp_path):
    config_path = tmp_path / 'capped.toml'
    config_path.write_text('[mesh]\nlevel_cap = 0\n', encoding='utf-8')
    code = _run(commands.cmd_adapt, arguments.adapt_parser(),
                ['-c', str(config_path), '-p', 'ex1', '-H', '0.5', '-s', '3', '-o', str(tmp_path)])
    assert code == 0
    rows = _read_csv(tmp_path / 'report.csv')
    assert len(rows) == 1
    assert rows[0]['marked'] == '0'
    manifest = json.loads((tmp_path / 'manifest.json').read_text(encoding='utf-8'))
    assert manifest['error'] is None
