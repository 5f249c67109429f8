"""
Helper utilities shared by the experiment app: CSV matrices and file names.
"""
import re
from pathlib import Path
from typing import List, Sequence, TextIO, Tuple, Union

import numpy as np

from services.engine.errors import DataError

PathLike = Union[str, Path]


def _is_number(token: str) -> bool:
    try:
        float(token)
    except ValueError:
        return False
    return True


def read_csv_matrix(path: PathLike) -> Tuple[List[str], np.ndarray]:
    """
    Read a comma-separated numeric table with a mandatory header row.

    Returns:
        (column names, data of shape (rows, columns))
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"CSV file not found: {path}")
    with path.open(encoding='utf-8') as handle:
        header = [column.strip() for column in handle.readline().strip().split(',')]
    if not header or header == [''] or all(_is_number(column) for column in header):
        raise DataError(f"{path}: header row is missing")
    try:
        data = np.loadtxt(path, delimiter=',', skiprows=1, ndmin=2, encoding='utf-8')
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from exc
    if data.size == 0:
        raise DataError(f"{path}: no data rows")
    if data.shape[1] != len(header):
        raise DataError(f"{path}: {data.shape[1]} columns under a {len(header)}-column header")
    return header, data


def write_matrix_csv(path: Union[PathLike, TextIO], matrix: np.ndarray, columns: Sequence[str], index: str = ''):
    """
    Write ``matrix`` under ``columns`` to a file or an open text stream; with
    ``index`` a leading 1-based row counter column of that name is added.
    Values keep 17 significant digits.
    """
    matrix = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    if matrix.shape[1] != len(columns):
        raise DataError(f"{matrix.shape[1]} columns of data for {len(columns)} header names")
    header = list(columns)
    if index:
        header = [index] + header
        matrix = np.hstack([np.arange(1, matrix.shape[0] + 1, dtype=np.float64)[:, None], matrix])
    if not hasattr(path, 'write'):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(path, matrix, delimiter=',', header=','.join(header), comments='', fmt='%.17g')
    return path


def safe_filename(filename: str) -> str:
    """Convert a string to a safe filename."""
    filename = re.sub(r'[^\w\s.-]', '', filename)
    filename = re.sub(r'\s+', '_', filename)
    return filename[:255]  # Max filename length


def read_series_csv(path: PathLike) -> Tuple[List[str], np.ndarray]:
    """
    Like read_csv_matrix, but a leading time column named ``t`` (as written
    by ``simulate``) is dropped.
    """
    header, data = read_csv_matrix(path)
    if header[0] == 't' and len(header) > 1:
        return header[1:], data[:, 1:]
    return header, data
