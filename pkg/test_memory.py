"""
Tests for the memory network.
"""
import numpy as np
import pytest

from services.engine.errors import DimensionError, TapeStateError
from services.engine.tape import Tape
from services.networks.memory import MemNet, load_memory, memnet_forward
from services.networks.params import ModelParams, ParamInitializer


def test_load_memory_sizes(params, init, rng):
    model = MemNet.create(params, init, n=3, d=4)
    load_memory(model, [rng.normal(size=3)])
    assert len(model.memory) == 1
    model.capacity = 100
    load_memory(model, list(rng.normal(size=(100, 3))))
    assert len(model.memory) == 100


def test_load_memory_evicts_oldest(params, init):
    model = MemNet.create(params, init, n=1, d=2, capacity=3)
    load_memory(model, [np.array([float(i)]) for i in range(5)])
    assert [entry[0] for entry in model.memory] == [2.0, 3.0, 4.0]


def test_load_memory_rejects_wrong_entry(params, init):
    model = MemNet.create(params, init, n=3, d=4)
    with pytest.raises(DimensionError):
        load_memory(model, [np.zeros(3), np.zeros(2)])


def test_empty_memory_is_a_state_error(params, init, tape):
    model = MemNet.create(params, init, n=2, d=2)
    load_memory(model, [])
    with pytest.raises(TapeStateError):
        memnet_forward(model, np.zeros(2), np.zeros(1), tape)


def test_single_item_reads_its_content(params, init, tape, rng):
    model = MemNet.create(params, init, n=2, d=3)
    entry, x, y_prev = rng.normal(size=2), rng.normal(size=2), rng.normal(size=1)
    load_memory(model, [entry])
    y, p = memnet_forward(model, x, y_prev, tape)
    assert np.array_equal(tape.value(p), [1.0])
    o = params['memnet.B'] @ entry
    u = params['memnet.C'] @ x
    assert np.allclose(tape.value(y), params['memnet.W1'] @ (o + u) + params['memnet.W2'] @ y_prev)


def test_zero_address_embedding_gives_uniform_addressing(params, init, tape, rng):
    model = MemNet.create(params, init, n=2, d=3)
    params.update('memnet.A', np.zeros((3, 2)))
    load_memory(model, list(rng.normal(size=(6, 2))))
    _, p = memnet_forward(model, rng.normal(size=2), np.zeros(1), tape)
    assert np.allclose(tape.value(p), np.full(6, 1 / 6))


def test_forward_matches_straight_line_evaluation(params, init, tape, rng):
    model = MemNet.create(params, init, n=3, d=4, o=2, capacity=7)
    history = rng.normal(size=(7, 3))
    x, y_prev = rng.normal(size=3), rng.normal(size=2)
    load_memory(model, list(history))
    y, p = memnet_forward(model, x, y_prev, tape)

    A, B, C = params['memnet.A'], params['memnet.B'], params['memnet.C']
    u = C @ x
    scores = np.array([u @ (A @ n_i) for n_i in history])
    weights = np.exp(scores - scores.max()) / np.exp(scores - scores.max()).sum()
    o = weights @ np.array([B @ n_i for n_i in history])
    assert np.allclose(tape.value(p), weights)
    assert np.allclose(tape.value(y), params['memnet.W1'] @ (o + u) + params['memnet.W2'] @ y_prev)


def test_forward_rejects_wrong_shapes(params, init, tape):
    model = MemNet.create(params, init, n=2, d=2)
    load_memory(model, [np.zeros(2)])
    with pytest.raises(DimensionError):
        memnet_forward(model, np.zeros(3), np.zeros(1), tape)
    with pytest.raises(DimensionError):
        memnet_forward(model, np.zeros(2), np.zeros(2), tape)


def test_duplicate_slot_splits_probability_without_moving_the_rest():
    rng = np.random.default_rng(17)
    for _ in range(100):
        params, init = ModelParams(), ParamInitializer(rng)
        model = MemNet.create(params, init, n=2, d=3, capacity=20)
        history = list(rng.normal(size=(rng.integers(1, 10), 2)))
        x, y_prev = rng.normal(size=2), rng.normal(size=1)
        load_memory(model, history)
        tape = Tape()
        p = tape.value(memnet_forward(model, x, y_prev, tape)[1])
        assert abs(p.sum() - 1.0) <= 1e-12

        twin = rng.integers(len(history))
        load_memory(model, history + [history[twin]])
        tape = Tape()
        p_twin = tape.value(memnet_forward(model, x, y_prev, tape)[1])
        assert p_twin[-1] == p_twin[twin]
        assert np.allclose(p_twin[:-1] / p_twin[:-1].sum(), p, rtol=1e-12, atol=1e-15)
