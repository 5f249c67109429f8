"""
Tests for Hebbian plastic layers and the pattern-completion task.
"""
import numpy as np
import pytest

from services.engine.errors import ContractError, TapeStateError
from services.engine.tape import Tape
from services.networks.plasticity import (
    PatternCompletionTask, PlasticLayer, bit_accuracy, episode_loss, hebbian_trace, hebbian_update, meta_train,
    pin_alpha_to_zero, plastic_forward, recall, without_plasticity,
)
from services.training.optim import OptimConfig


def test_zero_alpha_is_a_tanh_layer(params, init, tape, rng):
    layer = PlasticLayer.create(params, init, 3, 2, alpha_init=0.0)
    layer.H = rng.normal(size=(2, 3))
    x = rng.normal(size=3)
    assert np.allclose(tape.value(plastic_forward(layer, x, tape)), np.tanh(params['plastic.w'] @ x))


def test_zero_weights_and_trace(params, init, tape, rng):
    layer = PlasticLayer.create(params, init, 3, 2)
    params.update('plastic.w', np.zeros((2, 3)))
    assert np.array_equal(tape.value(plastic_forward(layer, rng.normal(size=3), tape)), np.zeros(2))


def test_forward_matches_straight_line(params, init, tape, rng):
    layer = PlasticLayer.create(params, init, 3, 2, alpha_init=0.4)
    layer.H = rng.normal(size=(2, 3))
    x, drive = rng.normal(size=3), rng.normal(size=2)
    expected = np.tanh((params['plastic.w'] + params['plastic.alpha'] * layer.H) @ x + drive)
    assert np.allclose(tape.value(plastic_forward(layer, x, tape, drive=drive)), expected)


def test_hebbian_update_rates(params, init, rng):
    y_in, y_out = rng.normal(size=3), rng.normal(size=2)
    frozen = PlasticLayer.create(params, init, 3, 2, eta=0.0)
    frozen.H = rng.normal(size=(2, 3))
    before = frozen.H.copy()
    hebbian_update(frozen, y_in, y_out)
    assert np.array_equal(frozen.H, before)

    layer = PlasticLayer.create(params, init, 3, 2, eta=1.0, name='full')
    layer.H = rng.normal(size=(2, 3))
    hebbian_update(layer, y_in, y_out)
    assert np.allclose(layer.H, np.outer(y_out, y_in))


def test_hebbian_trace_geometric_series(params, init):
    eta, k = 0.3, 6
    layer = PlasticLayer.create(params, init, 2, 2, eta=eta)
    y_in, y_out = np.array([1.0, -0.5]), np.array([0.2, 0.8])
    for _ in range(k):
        hebbian_update(layer, y_in, y_out)
    assert np.allclose(layer.H, (1 - (1 - eta) ** k) * np.outer(y_out, y_in))


def test_recorded_trace_matches_state_update(params, init, rng):
    layer = PlasticLayer.create(params, init, 3, 3, eta=0.25, learn_eta=True)
    y_in, y_out = rng.normal(size=3), rng.normal(size=3)
    tape = Tape()
    trace = hebbian_trace(layer, tape.constant(np.zeros((3, 3))), tape.constant(y_in), tape.constant(y_out), tape)
    hebbian_update(layer, y_in, y_out)
    assert layer.current_eta == pytest.approx(0.25)
    assert np.allclose(tape.value(trace), layer.H)


def test_hebbian_update_rejects_stale_activations(params, init):
    layer = PlasticLayer.create(params, init, 3, 2)
    with pytest.raises(TapeStateError):
        hebbian_update(layer, np.zeros(2), np.zeros(2))


def test_eta_outside_unit_interval(params, init):
    with pytest.raises(ContractError):
        PlasticLayer.create(params, init, 2, 2, eta=1.5)


def test_pattern_completion_episode_layout(rng):
    task = PatternCompletionTask(n_units=8, n_patterns=3, degrade=0.5)
    episode = task.sample(rng)
    assert episode.patterns.shape == (3, 8)
    assert int(np.sum(episode.cue == 0.0)) == 4
    assert any(np.array_equal(episode.target, p) for p in episode.patterns)
    per_presentation = 3 * (task.steps_per_pattern + task.gap_steps)
    assert len(episode.drives) == task.presentations * per_presentation + 1 + task.recall_steps


def test_episode_loss_and_recall(params, init, rng):
    task = PatternCompletionTask(n_units=4, n_patterns=2)
    layer = PlasticLayer.create(params, init, 4, 4, eta=0.2)
    episode = task.sample(rng)
    tape = Tape()
    loss = tape.value(episode_loss(layer, episode, tape))[0]
    assert loss >= 0.0
    assert recall(layer, episode).shape == (4,)
    assert 0.0 <= bit_accuracy(layer, [episode]) <= 1.0


def test_zero_epochs_leaves_parameters_unchanged(params, init):
    task = PatternCompletionTask(n_units=4, n_patterns=2)
    layer = PlasticLayer.create(params, init, 4, 4)
    before = {name: value.copy() for name, value in params.items()}
    assert meta_train(layer, task.sample, 0, OptimConfig(eta=0.1)) == []
    for name, value in params.items():
        assert np.array_equal(value, before[name])


def test_meta_train_records_one_loss_per_epoch(params, init):
    task = PatternCompletionTask(n_units=4, n_patterns=2)
    layer = PlasticLayer.create(params, init, 4, 4, alpha_init=0.1)
    history = meta_train(layer, task.sample, 3, OptimConfig(eta=0.05, batch_size=2, seed=5))
    assert len(history) == 3
    assert all(np.isfinite(history))
    assert not np.array_equal(params['plastic.alpha'], np.full((4, 4), 0.1))


def test_pin_alpha_to_zero_survives_updates(params, init):
    layer = PlasticLayer.create(params, init, 2, 2, alpha_init=0.5)
    pin_alpha_to_zero(layer)
    params.update('plastic.alpha', np.ones((2, 2)))
    assert np.array_equal(params['plastic.alpha'], np.zeros((2, 2)))


def test_without_plasticity_leaves_original_alone(params, init):
    layer = PlasticLayer.create(params, init, 2, 2, alpha_init=0.5)
    ablated = without_plasticity(layer)
    assert np.array_equal(ablated.params['plastic.alpha'], np.zeros((2, 2)))
    assert np.array_equal(params['plastic.alpha'], np.full((2, 2), 0.5))


def test_trace_stays_within_initial_or_unit_bound(params, init):
    rng = np.random.default_rng(19)
    layer = PlasticLayer.create(params, init, 4, 3)
    for _ in range(100):
        layer.eta = float(rng.uniform(0.0, 1.0))
        layer.H = rng.normal(scale=rng.choice([0.1, 3.0]), size=(3, 4))
        bound = max(np.abs(layer.H).max(), 1.0)
        for _ in range(20):
            hebbian_update(layer, rng.uniform(-1.0, 1.0, size=4), np.tanh(rng.normal(size=3)))
            assert np.abs(layer.H).max() <= bound + 1e-12


def test_frozen_trace_recalls_like_a_plain_tanh_layer(params, init):
    rng = np.random.default_rng(23)
    task = PatternCompletionTask(n_units=6, n_patterns=2)
    layer = PlasticLayer.create(params, init, 6, 6, eta=0.0, alpha_init=0.5)
    plain = without_plasticity(layer)
    episodes = [task.sample(rng) for _ in range(100)]
    for episode in episodes:
        assert np.array_equal(recall(layer, episode), recall(plain, episode))
    assert bit_accuracy(layer, episodes) == bit_accuracy(plain, episodes)
