"""
Tests for the CSV and file-name helpers in apps.core.utils.
"""
import io

import numpy as np
import pytest

from apps.core.utils import read_csv_matrix, read_series_csv, safe_filename, write_matrix_csv
from services.engine.errors import DataError


def test_read_csv_matrix(tmp_path):
    path = tmp_path / 'data.csv'
    path.write_text('a,b\n1,2\n3,4\n')
    header, data = read_csv_matrix(path)
    assert header == ['a', 'b']
    assert np.array_equal(data, [[1.0, 2.0], [3.0, 4.0]])


def test_read_csv_matrix_errors(tmp_path):
    with pytest.raises(FileNotFoundError):
        read_csv_matrix(tmp_path / 'missing.csv')

    headless = tmp_path / 'headless.csv'
    headless.write_text('1,2\n3,4\n')
    with pytest.raises(DataError, match='header'):
        read_csv_matrix(headless)

    narrow = tmp_path / 'narrow.csv'
    narrow.write_text('a,b,c\n1,2\n3,4\n')
    with pytest.raises(DataError, match='columns'):
        read_csv_matrix(narrow)

    empty = tmp_path / 'empty.csv'
    empty.write_text('a,b\n')
    with pytest.raises(DataError):
        read_csv_matrix(empty)


def test_read_series_csv_drops_time_column(tmp_path):
    path = tmp_path / 'traj.csv'
    path.write_text('t,x1,x2\n0,0.5,1\n1,0.25,2\n')
    header, data = read_series_csv(path)
    assert header == ['x1', 'x2']
    assert data.shape == (2, 2)


def test_write_matrix_csv_with_index():
    stream = io.StringIO()
    write_matrix_csv(stream, np.array([[0.25, 0.75], [1.0, 0.0]]), ['w1', 'w2'], index='row')
    assert stream.getvalue().splitlines() == ['row,w1,w2', '1,0.25,0.75', '2,1,0']


def test_write_matrix_csv_checks_columns(tmp_path):
    with pytest.raises(DataError):
        write_matrix_csv(tmp_path / 'bad.csv', np.zeros((2, 3)), ['a', 'b'])


def test_safe_filename():
    assert safe_filename('lag recall: run #1') == 'lag_recall_run_1'
