"""
Tests for recurrent cells, encoders and decoders.
"""
import numpy as np
import pytest

from services.engine.errors import ContractError, DimensionError
from services.engine.tape import Tape
from services.networks.params import ModelParams, ParamInitializer
from services.networks.primitives import attention
from services.networks.sequence import (
    EncoderDecoder, LstmCell, RnnCell, alignment_matrix, attention_decoder_step, bidirectional_encode,
    cell_step, decode_plain, encode, encode_sequence, input_sensitivity, lstm_step, rnn_step, seq2seq_forward,
)


def _zero_all(params):
    for name, value in list(params.items()):
        params.update(name, np.zeros(value.shape))


def test_rnn_step_zero_weights(params, init, tape):
    cell = RnnCell.create(params, 'rnn', 2, 3, init, out_dim=1, f_o='sigmoid')
    _zero_all(params)
    h, y = rnn_step(cell, np.array([1.0, -1.0]), np.ones(3), tape)
    assert np.array_equal(tape.value(h), np.zeros(3))
    assert tape.value(y)[0] == 0.5


def test_rnn_step_matches_hand_unrolled(params, init, tape, rng):
    cell = RnnCell.create(params, 'rnn', 2, 4, init, out_dim=2)
    X = rng.normal(size=(3, 2))
    h_node, h = np.zeros(4), np.zeros(4)
    for x in X:
        h_node, y_node = rnn_step(cell, x, h_node, tape)
        h = np.tanh(params['rnn.W_ih'] @ x + params['rnn.W_hh'] @ h)
    assert np.allclose(tape.value(h_node), h)
    assert np.allclose(tape.value(y_node), params['rnn.W_ho'] @ h)


def test_rnn_step_rejects_wrong_shapes(params, init, tape):
    cell = RnnCell.create(params, 'rnn', 2, 3, init)
    with pytest.raises(DimensionError):
        rnn_step(cell, np.ones(3), np.zeros(3), tape)
    with pytest.raises(DimensionError):
        rnn_step(cell, np.ones(2), np.zeros(2), tape)


def test_lstm_zero_weights(params, init, tape):
    cell = LstmCell.create(params, 'lstm', 2, 3, init)
    _zero_all(params)
    c_prev = np.array([1.0, -2.0, 0.5])
    h, c = lstm_step(cell, np.array([0.3, 0.4]), (np.zeros(3), c_prev), tape)
    assert np.allclose(tape.value(c), 0.5 * c_prev)
    assert np.allclose(tape.value(h), 0.5 * np.tanh(0.5 * c_prev))


def test_lstm_saturated_forget_gate_keeps_cell(params, init, tape):
    cell = LstmCell.create(params, 'lstm', 1, 2, init)
    _zero_all(params)
    params.update('lstm.b_f', np.full(2, 50.0))
    params.update('lstm.b_i', np.full(2, -50.0))
    c_prev = np.array([0.7, -0.3])
    _, c = lstm_step(cell, np.array([2.0]), (np.zeros(2), c_prev), tape)
    assert np.allclose(tape.value(c), c_prev)


def test_lstm_matches_reimplementation(params, init, tape, rng):
    cell = LstmCell.create(params, 'lstm', 2, 3, init)
    for name, value in list(params.items()):
        params.update(name, rng.normal(size=value.shape))
    x, h_prev, c_prev = rng.normal(size=2), rng.normal(size=3), rng.normal(size=3)

    z = np.concatenate([x, h_prev])
    sig = lambda v: 1.0 / (1.0 + np.exp(-v))
    gate = lambda g: params[f'lstm.W_{g}'] @ z + params[f'lstm.b_{g}']
    c = sig(gate('f')) * c_prev + sig(gate('i')) * np.tanh(gate('g'))
    h = sig(gate('o')) * np.tanh(c)

    h_node, c_node = lstm_step(cell, x, (h_prev, c_prev), tape)
    assert np.allclose(tape.value(c_node), c)
    assert np.allclose(tape.value(h_node), h)


def _model(params, init, **kwargs):
    values = dict(input_dim=2, output_dim=1, hidden=3)
    values.update(kwargs)
    return EncoderDecoder.create(params, init, **values)


def test_encode_single_step_and_iteration(params, init, tape, rng):
    model = _model(params, init)
    X = list(rng.normal(size=(5, 2)))
    states = encode(model, X, tape)
    assert len(states) == 5

    h = tape.constant(np.zeros(3))
    for x, state in zip(X, states):
        (h,) = cell_step(model.encoder, x, (h,), tape)
        assert np.allclose(tape.value(h), tape.value(state))

    (single,) = encode(model, X[:1], tape)
    first, _ = rnn_step(model.encoder, X[0], np.zeros(3), tape)
    assert np.array_equal(tape.value(single), tape.value(first))


def test_encode_zero_inputs_and_weights(params, init, tape):
    model = _model(params, init)
    _zero_all(params)
    for state in encode(model, [np.zeros(2)] * 4, tape):
        assert np.array_equal(tape.value(state), np.zeros(3))


def test_encode_rejects_empty_sequence(params, init, tape):
    with pytest.raises(ContractError):
        encode(_model(params, init), [], tape)


def test_bidirectional_halves(params, init, tape, rng):
    model = _model(params, init, bidirectional=True)
    X = list(rng.normal(size=(4, 2)))
    states = bidirectional_encode(model, X, tape)
    forward = [tape.value(h) for h in encode(model, X, tape)]

    backward_tape = Tape()
    h = backward_tape.constant(np.zeros(3))
    backward = []
    for x in reversed(X):
        (h,) = cell_step(model.encoder_backward, x, (h,), backward_tape)
        backward.append(backward_tape.value(h))
    backward = backward[::-1]

    for i, state in enumerate(states):
        assert np.allclose(tape.value(state)[:3], forward[i])
        assert np.allclose(tape.value(state)[3:], backward[i])


def test_bidirectional_palindrome_mirrors_with_shared_weights(params, init, tape, rng):
    model = _model(params, init, bidirectional=True, share_weights=True)
    half = list(rng.normal(size=(2, 2)))
    X = half + [rng.normal(size=2)] + half[::-1]
    states = [tape.value(s) for s in bidirectional_encode(model, X, tape)]
    T = len(states)
    for i in range(T):
        assert np.allclose(states[i][:3], states[T - 1 - i][3:])


def test_bidirectional_bridge_feeds_decoder(params, init, tape, rng):
    model = _model(params, init, bidirectional=True)
    H, (s0,) = encode_sequence(model, list(rng.normal(size=(3, 2))), tape)
    assert len(H) == 3 and tape.value(H[0]).shape == (6,)
    assert tape.value(s0).shape == (3,)


def test_decode_plain(params, init, tape, rng):
    model = _model(params, init)
    s0 = (rng.normal(size=3),)
    (y,) = decode_plain(model, s0, 1, None, tape)
    assert tape.value(y).shape == (1,)
    with pytest.raises(ContractError):
        decode_plain(model, s0, 0, None, tape)


def test_decode_plain_zero_weights_is_constant(params, init, tape, rng):
    model = _model(params, init)
    _zero_all(params)
    outputs = decode_plain(model, (rng.normal(size=3),), 4, None, tape)
    assert all(tape.value(y)[0] == 0.0 for y in outputs)


def test_decode_plain_matches_hand_unrolled(params, init, tape, rng):
    model = _model(params, init)
    s = rng.normal(size=3)
    outputs = decode_plain(model, (s,), 4, None, tape)
    y = np.zeros(1)
    for node in outputs:
        s = np.tanh(params['decoder.W_ih'] @ y + params['decoder.W_hh'] @ s)
        y = params['head.W'] @ s + params['head.b']
        assert np.allclose(tape.value(node), y)


def test_attention_decoder_step(params, init, tape, rng):
    model = _model(params, init, score_kind='feedforward', score_hidden=4)
    s_prev = (tape.constant(rng.normal(size=3)),)
    H = [tape.constant(h) for h in rng.normal(size=(4, 3))]
    y, state, alpha = attention_decoder_step(model, s_prev, np.zeros(1), H, tape)
    context, weights = attention(model.attention, s_prev[0], H, H, tape)
    assert np.allclose(tape.value(alpha), tape.value(weights))
    assert tape.value(y).shape == (1,)

    (single,) = H[:1]
    _, _, alpha = attention_decoder_step(model, s_prev, np.zeros(1), [single], tape)
    assert np.array_equal(tape.value(alpha), [1.0])


def test_attention_decoder_identical_states_context(params, init, tape, rng):
    model = _model(params, init, score_kind='feedforward')
    h = rng.normal(size=3)
    H = [tape.constant(h) for _ in range(5)]
    for _ in range(2):
        s_prev = (tape.constant(rng.normal(size=3)),)
        context, _ = attention(model.attention, s_prev[0], H, H, tape)
        assert np.allclose(tape.value(context), h)


def test_attention_decoder_requires_attention(params, init, tape):
    model = _model(params, init)
    with pytest.raises(ContractError):
        attention_decoder_step(model, (tape.constant(np.zeros(3)),), np.zeros(1), [], tape)


def test_alignment_matrix(params, init, rng):
    model = _model(params, init, score_kind='feedforward')
    assert np.array_equal(alignment_matrix(model, [rng.normal(size=2)], 3), np.ones((3, 1)))

    matrix = alignment_matrix(model, list(rng.normal(size=(6, 2))), 4)
    assert matrix.shape == (4, 6)
    assert np.all(np.abs(matrix.sum(axis=1) - 1.0) <= 1e-12)


def test_alignment_matrix_needs_attention(params, init, rng):
    with pytest.raises(ContractError):
        alignment_matrix(_model(params, init), list(rng.normal(size=(3, 2))), 2)


def test_seq2seq_teacher_forcing_changes_feedback(params, init, rng):
    model = _model(params, init, cell='lstm', score_kind='feedforward')
    X = list(rng.normal(size=(4, 2)))
    targets = [np.array([5.0]), np.array([-5.0])]
    free, forced = Tape(), Tape()
    free_out, _ = seq2seq_forward(model, X, 2, free)
    forced_out, _ = seq2seq_forward(model, X, 2, forced, targets=targets)
    assert np.allclose(free.value(free_out[0]), forced.value(forced_out[0]))
    assert not np.allclose(free.value(free_out[1]), forced.value(forced_out[1]))


def test_cosine_attention_rejects_bidirectional(params, init):
    with pytest.raises(ContractError):
        _model(params, init, bidirectional=True, score_kind='cosine')


def test_input_sensitivity_shrinks_with_length():
    params = ModelParams()
    cell = RnnCell.create(params, 'rnn', 1, 4, ParamInitializer(np.random.default_rng(0)))
    params.update('rnn.W_hh', 0.3 * np.eye(4))
    rng = np.random.default_rng(1)
    short = input_sensitivity(cell, list(rng.normal(size=(3, 1))))
    long = input_sensitivity(cell, list(rng.normal(size=(30, 1))))
    assert long < short
    assert long < 1e-10
