"""
Utility functions shared by the tracefem modules.
"""
import os
from typing import Iterator

import numpy as np

import logging

from tracefem.errors import InvalidPoints

logging.basicConfig(level=logging.DEBUG)


def write_lines(path: str, lines: Iterator[str]) -> str:
    """
    Write the lines produced by a generator to a text file, creating the parent directory when needed.
    Args:
        path: The destination file.
        lines: The lines to write (without line terminators).
    returns:
        The path that was written.
    """
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as file:
        file.write('\n'.join(lines))
        file.write('\n')
    return path


def as_points(x) -> tuple[np.ndarray, tuple[int, ...]]:
    """
    Flatten an array of points of shape (..., 3) to shape (n, 3).
    Args:
        x: A point or an array of points.
    returns:
        The (n, 3) float array and the leading shape needed to restore the input layout.
    """
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != 3:
        raise InvalidPoints(f'Points must have 3 coordinates : "{x.shape}"')
    return x.reshape(-1, 3), x.shape[:-1]


def restore(values: np.ndarray, leading: tuple[int, ...]) -> np.ndarray:
    """
    Reshape per-point results back to the leading shape returned by as_points.
    """
    return values.reshape(leading + values.shape[1:])


def unit_vectors(v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """
    Normalize the rows of v.
    Args:
        v: The (n, 3) vectors.
    returns:
        The normalized vectors and their original lengths. Zero rows stay zero.
    """
    length = np.linalg.norm(v, axis=-1)
    safe = np.where(length > 0.0, length, 1.0)
    return v / safe[..., None], length


def projectors(normals: np.ndarray) -> np.ndarray:
    """
    Tangential projectors I - n n^T for an array of unit normals of shape (..., 3).
    """
    return np.eye(3) - normals[..., :, None] * normals[..., None, :]
