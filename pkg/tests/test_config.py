import pytest

import config
from tracefem.errors import ConfigError


def _write(tmp_path, text):
    path = tmp_path / 'run.toml'
    path.write_text(text, encoding='utf-8')
    return str(path)


def test_defaults():
    values = config.load()
    assert values['problem'] == 'ex1'
    assert values['variant'] == 'surface_gradient'
    assert values['supg.delta0'] == 0.5
    assert values['supg.delta1'] == 0.1
    assert config.manifest_path == 'output/manifest.json'


def test_toml_tables_are_flattened(tmp_path):
    path = _write(tmp_path, 'problem = "ex6"\neps = 1\n\n[mesh]\nh0 = 0.5\nlevels = 2\n\n[output]\n'
                            f'directory = "{tmp_path.as_posix()}/out"\n')
    values = config.load(path)
    assert values['problem'] == 'ex6'
    assert values['eps'] == 1.0
    assert isinstance(values['eps'], float)
    assert values['mesh.h0'] == 0.5
    assert values['mesh.levels'] == 2
    assert config.report_csv_path == f'{tmp_path.as_posix()}/out/report.csv'


def test_precedence(tmp_path):
    path = _write(tmp_path, 'problem = "ex2"\nvariant = "full_gradient"\n')
    values = config.load(path, {'variant': 'supg', 'eps': None}, {'problem': 'ex6', 'variant': 'supg'})
    assert values['problem'] == 'ex2'
    assert values['variant'] == 'supg'
    assert values['eps'] is None


@pytest.mark.parametrize('text', [
    'unknown_key = 1\n',
    'variant = "upwind"\n',
    '[mesh]\nlevels = true\n',
    '[mesh]\nh0 = "small"\n',
    '[mesh]\nh0 = -1.0\n',
    '[quadrature]\ndegree = 9\n',
    '[converge]\nvariants = ["surface_gradient", "upwind"]\n',
    'problem = [\n',
])
def test_invalid_files(tmp_path, text):
    with pytest.raises(ConfigError):
        config.load(_write(tmp_path, text))


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        config.load(str(tmp_path / 'missing.toml'))


def test_problem_params_and_box():
    config.load(overrides={'eps': 1e-3, 'domain.lower': -1.5, 'domain.upper': 1.5})
    assert config.problem_params()['eps'] == 1e-3
    assert config.domain_box() == (-1.5, 1.5)
    config.load(overrides={'domain.lower': 1.0, 'domain.upper': 0.0})
    with pytest.raises(ConfigError):
        config.domain_box()
    config.load()
    assert 'eps' not in config.problem_params()
    assert config.domain_box() is None


def test_threads_default_to_the_hardware_count(monkeypatch):
    assert config.hardware_threads() >= 1
    monkeypatch.setattr(config.os, 'cpu_count', lambda: None)
    assert config.hardware_threads() == 1
    monkeypatch.setattr(config.os, 'cpu_count', lambda: 6)
    assert config.hardware_threads() == 6
