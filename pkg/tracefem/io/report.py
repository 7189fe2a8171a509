"""
This module contains the tabular and run-record outputs: CSV tables, the JSON run manifest and the
MatrixMarket dump of assembled matrices.
"""
import csv
import json
import os
import platform

import numpy as np
import scipy
import scipy.io
import scipy.sparse



def _prepare(path: str):
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)


def write_csv(path: str, rows: list[dict]) -> str:
    """
    Write rows sharing the keys of the first row (later keys are appended to the header).
    """
    _prepare(path)
    header = []
    for row in rows:
        header += [key for key in row if key not in header]
    with open(path, 'w', newline='', encoding='utf-8') as file:
        writer = csv.DictWriter(file, fieldnames=header, lineterminator='\n')
        writer.writeheader()
        for row in rows:
            writer.writerow({key: _cell(value) for key, value in row.items()})
    return path


def _cell(value):
    if isinstance(value, float):
        return repr(value)
    return value


def versions() -> dict:
    return {'python': platform.python_version(), 'numpy': np.__version__, 'scipy': scipy.__version__}


def error_record(error: Exception) -> dict:
    return {'type': type(error).__name__, 'message': str(error)}


def write_manifest(path: str, command: str, config: dict, artifacts: list[str], timings: dict,
                   error: Exception | None = None, summary: dict | None = None,
                   metadata: dict | None = None) -> str:
    """
    Write the run manifest: command, config echo, versions, timings, artifacts, run metadata and the error record.
    """
    _prepare(path)
    manifest = {'command': command,
                'config': config,
                'versions': versions(),
                'timings': timings,
                'artifacts': artifacts,
                'summary': summary or {},
                'metadata': metadata or {},
                'error': None if error is None else error_record(error)}
    with open(path, 'w', encoding='utf-8') as file:
        json.dump(manifest, file, indent=4, default=str)
    return path


def dump_matrix(path: str, matrix) -> str:
    """
    Write a sparse matrix in MatrixMarket coordinate format (the .mtx extension is added when missing).
    """
    if not path.endswith('.mtx'):
        path += '.mtx'
    _prepare(path)
    scipy.io.mmwrite(path, scipy.sparse.coo_matrix(matrix))
    return path
