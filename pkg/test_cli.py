"""
Tests for the command-line entry point and the management commands behind it.
"""
import numpy as np
import pytest
from django.core.management import call_command
from django.core.management.base import CommandError

from apps.experiments.cli import cli_dispatch, usage
from apps.experiments.services.config import build_config
from apps.experiments.services.gradcheck_suite import MODULES, run_suite
from apps.experiments.services.trainer import Trainer
from services.systems.dataset import read_trajectory


def test_simulate_logistic_rows(capsys):
    assert cli_dispatch(['simulate', '--system', 'logistic', '--theta', '4.0', '--steps', '3']) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == 't,x1'
    assert [float(line.split(',')[1]) for line in lines[1:]] == [0.5, 1.0, 0.0, 0.0]


def test_simulate_driven_system_to_file(tmp_path):
    out = tmp_path / 'narma.csv'
    assert cli_dispatch(['simulate', '--system', 'narma', '--steps', '25', '--seed', '3', '--out', str(out)]) == 0
    t, states = read_trajectory(out)
    assert t.shape == (26,) and states.shape == (26, 1)


def test_simulate_bad_theta_is_a_usage_error(capsys):
    assert cli_dispatch(['simulate', '--system', 'henon', '--theta', '1.4', '--steps', '3']) == 1
    assert cli_dispatch(['simulate', '--system', 'logistic', '--theta', 'x', '--steps', '3']) == 1
    assert 'simulate:' in capsys.readouterr().err


def test_usage_and_unknown_subcommands(capsys):
    assert cli_dispatch([]) == 1
    assert cli_dispatch(['--help']) == 0
    assert cli_dispatch(['fly']) == 1
    err = capsys.readouterr().err
    assert "unknown subcommand 'fly'" in err
    assert 'gradcheck' in usage()


def test_unknown_flag_exits_with_usage_error():
    assert cli_dispatch(['simulate', '--system', 'logistic', '--steps', '3', '--colour', 'red']) == 1
    assert cli_dispatch(['simulate', '--system', 'lorenz', '--steps', '3']) == 1


def test_subcommand_help_exits_cleanly(capsys):
    assert cli_dispatch(['predict', '--help']) == 0
    assert '--model' in capsys.readouterr().out


@pytest.mark.django_db
def test_train_with_missing_config(tmp_path, capsys):
    assert cli_dispatch(['train', '--config', str(tmp_path / 'missing.ini')]) == 1
    assert 'config file not found' in capsys.readouterr().err


@pytest.mark.django_db
def test_train_writes_model_directory(tmp_path, linear_config_text, capsys, settings):
    settings.DP_SEED = None
    config = tmp_path / 'linear.ini'
    config.write_text(linear_config_text)
    out = tmp_path / 'trained'
    assert cli_dispatch(['train', '--config', str(config), '--out', str(out)]) == 0
    assert (out / 'params.npz').is_file()
    assert '"test_mse"' in capsys.readouterr().out


def test_gradcheck_single_module(capsys):
    assert cli_dispatch(['gradcheck', '--module', 'autodiff', '--seeds', '2']) == 0
    assert 'All gradient checks passed' in capsys.readouterr().out


def test_gradcheck_rejects_unknown_module():
    with pytest.raises(CommandError):
        call_command('gradcheck', '--module', 'everything')


def test_gradcheck_suite_covers_every_module():
    results = run_suite(seeds=1)
    assert [result.module for result in results] == list(MODULES)
    for result in results:
        assert result.passed, result.as_dict()


def test_gradcheck_suite_unknown_module():
    with pytest.raises(KeyError):
        run_suite(['nope'])


@pytest.fixture
def linear_model(tmp_path):
    out = tmp_path / 'linear-model'
    Trainer(build_config(dict(kind='linear', source='linear', window=3, length=80, epochs=2)), out).run()
    return out


def _write_series(path, rows):
    header = 't,' + ','.join(f'x{i + 1}' for i in range(rows.shape[1]))
    np.savetxt(path, np.column_stack([np.arange(len(rows)), rows]), delimiter=',', header=header, comments='')
    return path


def test_predict_to_file(linear_model, tmp_path, rng):
    data = _write_series(tmp_path / 'input.csv', rng.normal(size=(7, 3)))
    out = tmp_path / 'predictions.csv'
    assert cli_dispatch(['predict', '--model', str(linear_model), '--input', str(data), '--out', str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == 'window,y3'
    assert len(lines) == 1 + 5


def test_predict_to_stdout(linear_model, tmp_path, rng, capsys):
    data = _write_series(tmp_path / 'input.csv', rng.normal(size=(3, 3)))
    assert cli_dispatch(['predict', '--model', str(linear_model), '--input', str(data)]) == 0
    assert capsys.readouterr().out.splitlines()[0] == 'window,y3'


def test_predict_errors(linear_model, tmp_path, rng):
    short = _write_series(tmp_path / 'short.csv', rng.normal(size=(2, 3)))
    assert cli_dispatch(['predict', '--model', str(linear_model), '--input', str(short)]) == 1
    wide = _write_series(tmp_path / 'wide.csv', rng.normal(size=(5, 4)))
    assert cli_dispatch(['predict', '--model', str(linear_model), '--input', str(wide)]) == 1
    assert cli_dispatch(['predict', '--model', str(tmp_path / 'nowhere'), '--input', str(short)]) == 1


def test_export_attention(tmp_path, rng):
    model_dir = tmp_path / 'attn-model'
    Trainer(build_config(dict(kind='dual-stage', source='driven-features', features=3, length=80, window=4,
                              hidden=4, epochs=1)), model_dir).run()
    data = _write_series(tmp_path / 'input.csv', rng.normal(size=(6, 4)))
    out = tmp_path / 'weights.csv'
    assert cli_dispatch(['export-attention', '--model', str(model_dir), '--input', str(data), '--out', str(out)]) == 0
    assert out.read_text().splitlines()[0] == 'row,w1,w2,w3,w4'
    input_weights = (tmp_path / 'weights_input.csv').read_text().splitlines()
    assert input_weights[0] == 'row,w1,w2,w3'
    assert len(input_weights) == 1 + 4


def test_export_attention_needs_attention_model(linear_model, tmp_path, rng):
    data = _write_series(tmp_path / 'input.csv', rng.normal(size=(4, 3)))
    out = tmp_path / 'weights.csv'
    assert cli_dispatch(['export-attention', '--model', str(linear_model), '--input', str(data), '--out', str(out)]) == 1
