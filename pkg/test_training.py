"""
Tests for losses and gradient-descent updates.
"""
import numpy as np
import pytest

from services.engine.errors import ContractError, DimensionError, TrainingError
from services.engine.tape import Tape
from services.networks.params import ModelParams
from services.training.losses import loss_mse, sequence_mse
from services.training.optim import OptimConfig, Optimizer, clip_gradients, sgd_step


def test_loss_mse_examples(tape, rng):
    assert tape.value(loss_mse(tape.constant([1.0, 2.0]), [1.0, 2.0], tape))[0] == 0.0
    assert tape.value(loss_mse(tape.constant([1.0, 1.0]), [0.0, 0.0], tape))[0] == 1.0
    pred, target = rng.normal(size=5), rng.normal(size=5)
    assert tape.value(loss_mse(tape.constant(pred), target, tape))[0] == pytest.approx(np.mean((pred - target) ** 2))
    with pytest.raises(DimensionError):
        loss_mse(tape.constant([1.0]), [1.0, 2.0], tape)


def test_sequence_mse_averages_every_entry(tape):
    preds = [tape.constant([1.0]), tape.constant([3.0])]
    assert tape.value(sequence_mse(preds, [np.array([0.0]), np.array([0.0])], tape))[0] == 5.0
    with pytest.raises(ContractError):
        sequence_mse(preds, [np.array([0.0])], tape)


def test_sgd_step_arithmetic():
    params = ModelParams({'w': [1.0]})
    sgd_step(params, {'w': np.array([2.0])}, OptimConfig(eta=0.1))
    assert params['w'][0] == pytest.approx(0.8)


def test_zero_learning_rate_leaves_parameters():
    params = ModelParams({'w': [1.0, -2.0]})
    sgd_step(params, {'w': np.array([3.0, 4.0])}, OptimConfig(eta=0.0))
    assert np.array_equal(params['w'], [1.0, -2.0])


def test_clip_gradients_rescales_global_norm():
    clipped = clip_gradients({'a': np.array([6.0]), 'b': np.array([8.0])}, 1.0)
    assert clipped['a'][0] == pytest.approx(0.6)
    assert clipped['b'][0] == pytest.approx(0.8)
    untouched = clip_gradients({'a': np.array([0.1])}, 1.0)
    assert untouched['a'][0] == 0.1


def test_clipped_step_uses_scaled_gradient():
    params = ModelParams({'w': [0.0, 0.0]})
    sgd_step(params, {'w': np.array([6.0, 8.0])}, OptimConfig(eta=1.0, clip_norm=1.0))
    assert np.allclose(params['w'], [-0.6, -0.8])


def test_non_finite_gradient_names_parameter():
    params = ModelParams({'w': [1.0]})
    with pytest.raises(TrainingError) as excinfo:
        sgd_step(params, {'w': np.array([np.nan])}, OptimConfig())
    assert excinfo.value.parameter == 'w'


def test_momentum_accumulates_velocity():
    params = ModelParams({'w': [0.0]})
    optimizer = Optimizer(params, OptimConfig(eta=1.0, optimizer='sgd-momentum', momentum=0.5))
    optimizer.step({'w': np.array([1.0])})
    optimizer.step({'w': np.array([1.0])})
    assert params['w'][0] == pytest.approx(-2.5)


def test_gradients_for_unknown_parameters_are_ignored():
    params = ModelParams({'w': [1.0]})
    sgd_step(params, {'w': np.array([1.0]), 'other': np.array([1.0])}, OptimConfig(eta=0.5))
    assert params['w'][0] == 0.5


@pytest.mark.parametrize('values', [
    dict(eta=-0.1), dict(epochs=-1), dict(batch_size=0), dict(clip_norm=0.0), dict(optimizer='adam'),
])
def test_optim_config_contracts(values):
    with pytest.raises(ContractError):
        OptimConfig(**values)


def test_one_descent_step_lowers_a_quadratic():
    params = ModelParams({'w': [3.0, -1.0]})
    tape = Tape()
    loss = loss_mse(tape.param('w', params['w']), [0.0, 0.0], tape)
    before = tape.value(loss)[0]
    sgd_step(params, tape.backward(loss), OptimConfig(eta=0.1))
    assert np.sum(params['w'] ** 2) / 2 < before
