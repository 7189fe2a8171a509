import os

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from tracefem.errors import ConfigError

# Validated run configuration (dotted key -> value).
values: dict

output_directory: str
surface_vtk_path: str
grid_vtk_path: str
report_csv_path: str
table_path: str
manifest_path: str
matrix_path: str

surface_vtk_file_name = 'surface.vtk'
grid_vtk_file_name = 'grid.vtk'
report_csv_file_name = 'report.csv'
table_file_name = 'table.txt'
manifest_file_name = 'manifest.json'
matrix_file_name = 'matrix.mtx'


def hardware_threads() -> int:
    return os.cpu_count() or 1


DEFAULTS = {
    'problem': 'ex1',
    'eps': None,
    'lambda': 0.6,
    'alternate_spot': False,
    'surface': 'sphere',
    'domain.lower': None,
    'domain.upper': None,
    'mesh.h0': 0.25,
    'mesh.levels': 0,
    'mesh.level_cap': 12,
    'variant': 'surface_gradient',
    'supg.delta0': 0.5,
    'supg.delta1': 0.1,
    'quadrature.degree': 4,
    'adapt.steps': 12,
    'adapt.mode': 'elliptic',
    'adapt.alpha_g': 0.0,
    'adapt.conormal': True,
    'adapt.max_dofs': 200000,
    'converge.levels': 4,
    'converge.variants': ['surface_gradient'],
    'shishkin.band_halfwidth': 1.0 / 64.0,
    'shishkin.h_min': 1.0 / 128.0,
    'shishkin.h_max': 0.25,
    'shishkin.refinements': 2,
    'report.exterior_abs_x3': 0.3,
    'solver.method': 'auto',
    'solver.tol': 1e-10,
    'output.directory': 'output',
    'seed': 0,
    'threads': hardware_threads(),
    'deterministic': True,
}

# Types of the keys whose default is None.
OPTIONAL_FLOATS = {'eps', 'domain.lower', 'domain.upper'}

VARIANTS = ('surface_gradient', 'full_gradient', 'supg')

CHOICES = {
    'variant': VARIANTS,
    'adapt.mode': ('elliptic', 'advection'),
    'solver.method': ('direct', 'iterative', 'auto'),
    'surface': ('sphere', 'torus', 'wavy_cigar', 'six_handles'),
}


def flatten(document: dict, prefix: str = '') -> dict:
    """
    Flatten nested TOML tables to dotted keys.
    """
    flat = {}
    for key, value in document.items():
        name = f'{prefix}{key}'
        if isinstance(value, dict):
            flat.update(flatten(value, f'{name}.'))
        else:
            flat[name] = value
    return flat


def _check_type(key: str, value):
    default = DEFAULTS[key]
    if key in OPTIONAL_FLOATS or isinstance(default, float):
        if value is not None and (isinstance(value, bool) or not isinstance(value, (int, float))):
            raise ConfigError(f'Expected a number for {key} : "{value}"')
        return None if value is None else float(value)
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f'Expected true or false for {key} : "{value}"')
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f'Expected an integer for {key} : "{value}"')
        return value
    if isinstance(default, list):
        if not isinstance(value, list) or not all(isinstance(item, str) for item in value):
            raise ConfigError(f'Expected a list of strings for {key} : "{value}"')
        return list(value)
    if not isinstance(value, str):
        raise ConfigError(f'Expected a string for {key} : "{value}"')
    return value


def validate(flat: dict) -> dict:
    """
    Merge dotted key values over the defaults.
    Raises ConfigError on unknown keys, wrong types and values outside their choices.
    """
    merged = {key: list(value) if isinstance(value, list) else value for key, value in DEFAULTS.items()}
    for key, value in flat.items():
        if key not in DEFAULTS:
            raise ConfigError(f'Unknown config key : "{key}"')
        merged[key] = _check_type(key, value)
    for key, choices in CHOICES.items():
        if merged[key] not in choices:
            raise ConfigError(f'Invalid value for {key} : "{merged[key]}" (expected one of {", ".join(choices)})')
    for variant in merged['converge.variants']:
        if variant not in VARIANTS:
            raise ConfigError(f'Invalid value for converge.variants : "{variant}"')
    if not 1 <= merged['quadrature.degree'] <= 7:
        raise ConfigError(f'Invalid value for quadrature.degree : "{merged["quadrature.degree"]}"')
    if merged['mesh.h0'] <= 0.0 or merged['solver.tol'] <= 0.0 or merged['threads'] < 1:
        raise ConfigError('mesh.h0, solver.tol and threads must be positive')
    if merged['adapt.steps'] < 0 or merged['mesh.levels'] < 0:
        raise ConfigError('adapt.steps and mesh.levels must not be negative')
    return merged


def reset():
    global values
    values = validate({})


def load(path: str | None = None, overrides: dict | None = None, defaults: dict | None = None) -> dict:
    """
    Load a TOML config file, apply command line overrides and store the result in config.values.
    Args:
        path: The config file, or None for the defaults.
        overrides: Dotted key values taking precedence over the file.
        defaults: Dotted key values of the command, replaced by the file.
    returns:
        The validated values.
    """
    global values
    flat = dict(defaults or {})
    if path is not None:
        if not os.path.exists(path):
            raise ConfigError(f'Config file doesn\'t exists : "{path}"')
        try:
            with open(path, 'rb') as file:
                flat.update(flatten(tomllib.load(file)))
        except tomllib.TOMLDecodeError as e:
            raise ConfigError(f'Invalid config file {path} : "{e}"')
    flat.update({key: value for key, value in (overrides or {}).items() if value is not None})
    values = validate(flat)
    set_output_directory(values['output.directory'])
    return values


def problem_params() -> dict:
    """
    Keyword parameters of builtin_problem taken from the config.
    """
    params = {'lam': values['lambda'], 'alternate_spot': values['alternate_spot'], 'surface': values['surface']}
    if values['eps'] is not None:
        params['eps'] = values['eps']
    return params


def domain_box() -> tuple[float, float] | None:
    lower, upper = values['domain.lower'], values['domain.upper']
    if lower is None and upper is None:
        return None
    if lower is None or upper is None or lower >= upper:
        raise ConfigError(f'Invalid domain box : "{lower} {upper}"')
    return lower, upper


def set_output_directory(directory: str):
    global output_directory, \
        surface_vtk_path, \
        grid_vtk_path, \
        report_csv_path, \
        table_path, \
        manifest_path, \
        matrix_path
    output_directory = directory.strip()
    surface_vtk_path = f'{output_directory}/{surface_vtk_file_name}'
    grid_vtk_path = f'{output_directory}/{grid_vtk_file_name}'
    report_csv_path = f'{output_directory}/{report_csv_file_name}'
    table_path = f'{output_directory}/{table_file_name}'
    manifest_path = f'{output_directory}/{manifest_file_name}'
    matrix_path = f'{output_directory}/{matrix_file_name}'


def check_output_directory():
    if not os.path.exists(output_directory):
        os.makedirs(output_directory, exist_ok=True)
    if not os.path.isdir(output_directory):
        raise ConfigError(f'Output directory is not a directory : "{output_directory}"')


reset()
set_output_directory(values['output.directory'])
