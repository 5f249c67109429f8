"""
Tests for dense layers, softmax, attention scores and attention.
"""
import numpy as np
import pytest

from services.engine.errors import ContractError, DimensionError, NumericError
from services.engine.tape import Tape
from services.networks.params import ModelParams, ParamInitializer
from services.networks.primitives import (
    AttentionSpec, DenseLayer, attention, dense_forward, diff_branch, score, self_attention, softmax,
)


def _dense(params, init, W, activation, bias=True):
    layer = DenseLayer.create(params, 'dense', W.shape[1], W.shape[0], init, activation=activation, bias=bias)
    params.update('dense.W', W)
    return layer


def test_dense_identity_weights_pass_input_through(params, init, tape):
    layer = _dense(params, init, np.eye(3), 'identity')
    out = dense_forward(layer, tape.constant([1.0, -2.0, 0.5]), tape)
    assert np.array_equal(tape.value(out), [1.0, -2.0, 0.5])


def test_dense_zero_weights_tanh(params, init, tape):
    layer = _dense(params, init, np.zeros((2, 3)), 'tanh')
    assert np.array_equal(tape.value(dense_forward(layer, tape.constant([4.0, 5.0, 6.0]), tape)), [0.0, 0.0])


def test_dense_sigmoid_example(params, init, tape):
    layer = _dense(params, init, np.array([[1.0, 1.0]]), 'sigmoid', bias=False)
    out = dense_forward(layer, tape.constant([2.0, 3.0]), tape)
    assert tape.value(out)[0] == pytest.approx(0.993307, abs=1e-6)


def test_dense_rejects_wrong_input(params, init, tape):
    layer = DenseLayer.create(params, 'dense', 3, 2, init)
    with pytest.raises(DimensionError):
        dense_forward(layer, tape.constant([1.0, 2.0]), tape)


def test_softmax_examples(tape):
    assert np.allclose(tape.value(softmax(tape.constant([0.0, 0.0]), tape)), [0.5, 0.5])
    assert np.allclose(tape.value(softmax(tape.constant([0.0, np.log(3.0)]), tape)), [0.25, 0.75])
    big = tape.value(softmax(tape.constant([1000.0, 1000.0, 999.0]), tape))
    assert np.all(np.isfinite(big))
    assert big.sum() == pytest.approx(1.0)
    e = np.exp(-1.0)
    assert np.allclose(big, [1 / (2 + e), 1 / (2 + e), e / (2 + e)])


def test_softmax_rejects_empty(tape):
    with pytest.raises(ContractError):
        softmax(tape.constant(np.zeros(0)), tape)


def test_cosine_scores(tape):
    spec = AttentionSpec('cosine')
    q = tape.constant([1.0, 2.0])
    assert tape.value(score(spec, q, tape.constant([1.0, 2.0]), tape))[0] == pytest.approx(1.0)
    assert tape.value(score(spec, tape.constant([1.0, 0.0]), tape.constant([0.0, 1.0]), tape))[0] == 0.0
    with pytest.raises(NumericError):
        score(spec, q, tape.constant([0.0, 0.0]), tape)


def test_feedforward_score_with_zero_output_weights(params, init, tape):
    spec = AttentionSpec.create(params, 'attn', 2, 2, init, 'feedforward', hidden=4)
    params.update('attn.Z_a', np.zeros((1, 4)))
    assert tape.value(score(spec, tape.constant([1.0, 2.0]), tape.constant([3.0, 4.0]), tape))[0] == 0.0


def test_attention_single_pair(params, init, tape):
    spec = AttentionSpec.create(params, 'attn', 2, 2, init)
    context, weights = attention(spec, tape.constant([0.3, 0.1]), [tape.constant([1.0, 1.0])],
                                 [tape.constant([5.0, 6.0, 7.0])], tape)
    assert np.array_equal(tape.value(weights), [1.0])
    assert np.allclose(tape.value(context), [5.0, 6.0, 7.0])


def test_attention_identical_keys_average_values(params, init, tape):
    spec = AttentionSpec.create(params, 'attn', 2, 2, init)
    key = [0.4, -0.2]
    values = [[1.0, 0.0], [3.0, 2.0], [5.0, 4.0]]
    context, weights = attention(spec, tape.constant([1.0, 0.5]), [tape.constant(key) for _ in values],
                                 [tape.constant(v) for v in values], tape)
    assert np.allclose(tape.value(weights), 1 / 3)
    assert np.allclose(tape.value(context), np.mean(values, axis=0))


def test_attention_matches_straight_line_computation(params, init, tape, rng):
    spec = AttentionSpec.create(params, 'attn', 3, 3, init, hidden=4)
    q = rng.normal(size=3)
    keys, values = rng.normal(size=(5, 3)), rng.normal(size=(5, 2))
    context, weights = attention(spec, tape.constant(q), [tape.constant(k) for k in keys],
                                 [tape.constant(v) for v in values], tape)

    scores = np.array([(params['attn.Z_a'] @ np.tanh(params['attn.W_a'] @ np.concatenate([q, k])))[0] for k in keys])
    expected_weights = np.exp(scores - scores.max()) / np.exp(scores - scores.max()).sum()
    assert np.allclose(tape.value(weights), expected_weights)
    assert np.allclose(tape.value(context), expected_weights @ values)


def test_attention_contracts(params, init, tape):
    spec = AttentionSpec.create(params, 'attn', 2, 2, init)
    q = tape.constant([1.0, 0.0])
    with pytest.raises(ContractError):
        attention(spec, q, [], [], tape)
    with pytest.raises(DimensionError):
        attention(spec, q, [tape.constant([1.0, 0.0]), tape.constant([1.0, 0.0, 0.0])],
                  [tape.constant([1.0]), tape.constant([2.0])], tape)


def test_self_attention(params, init, tape, rng):
    spec = AttentionSpec.create(params, 'attn', 2, 2, init)
    single = tape.constant([0.2, 0.7])
    assert np.allclose(tape.value(self_attention(spec, [single], tape)[0]), [0.2, 0.7])

    twins = [tape.constant([1.5, -0.5]), tape.constant([1.5, -0.5])]
    for out in self_attention(spec, twins, tape):
        assert np.allclose(tape.value(out), [1.5, -0.5])

    sequence = [tape.constant(row) for row in rng.normal(size=(4, 2))]
    outputs = self_attention(spec, sequence, tape)
    for x, out in zip(sequence, outputs):
        expected, _ = attention(spec, x, sequence, sequence, tape)
        assert np.array_equal(tape.value(out), tape.value(expected))


def test_diff_branch(tape):
    y, z = tape.constant([2.0]), tape.constant([4.0])
    assert tape.value(diff_branch(tape.constant([1.0]), y, z, tape))[0] == 2.0
    assert tape.value(diff_branch(tape.constant([0.0]), y, z, tape))[0] == 4.0
    assert tape.value(diff_branch(tape.constant([0.5]), y, z, tape))[0] == 3.0
    with pytest.raises(DimensionError):
        diff_branch(tape.constant([0.5]), y, tape.constant([1.0, 2.0]), tape)


def test_diff_branch_gradient_reaches_the_weight():
    tape = Tape()
    a = tape.param('a', [0.25])
    out = tape.sum(diff_branch(a, tape.constant([2.0, 1.0]), tape.constant([4.0, 0.0]), tape))
    assert tape.backward(out)['a'][0] == pytest.approx(-1.0)


def test_model_params_update_keeps_shape():
    params = ModelParams()
    params.add('w', [1.0, 2.0])
    with pytest.raises(DimensionError):
        params.update('w', [1.0])
    with pytest.raises(ContractError):
        params.add('w', [0.0, 0.0])


def test_model_params_save_and_load(tmp_path):
    params = ModelParams()
    params.add('w', [[1.0, 2.0]])
    params.save(tmp_path / 'params.npz')
    restored = ModelParams({'w': np.zeros((1, 2))})
    restored.load(tmp_path / 'params.npz')
    assert np.array_equal(restored['w'], [[1.0, 2.0]])


def test_initializer_bounds():
    weights = ParamInitializer(np.random.default_rng(0)).uniform(10, 4)
    assert weights.shape == (10, 4)
    assert np.all(np.abs(weights) <= 0.5)


def test_softmax_sums_to_one_and_follows_permutations():
    rng = np.random.default_rng(7)
    for _ in range(200):
        z = rng.normal(scale=rng.choice([1.0, 10.0, 300.0]), size=rng.integers(1, 20))
        perm = rng.permutation(z.size)
        tape = Tape()
        p = tape.value(softmax(tape.constant(z), tape))
        p_perm = tape.value(softmax(tape.constant(z[perm]), tape))
        assert abs(p.sum() - 1.0) <= 1e-12
        assert np.allclose(p_perm, p[perm], rtol=1e-14, atol=1e-300)


@pytest.mark.parametrize('score_kind', ['feedforward', 'cosine'])
def test_attention_context_stays_inside_the_values(score_kind):
    rng = np.random.default_rng(11)
    for _ in range(100):
        params, init = ModelParams(), ParamInitializer(rng)
        spec = AttentionSpec.create(params, 'attn', 3, 3, init, score_kind, hidden=4)
        m = rng.integers(1, 8)
        keys, values = rng.normal(size=(m, 3)), rng.normal(scale=5.0, size=(m, 2))
        tape = Tape()
        context, weights = attention(spec, tape.constant(rng.normal(size=3)), [tape.constant(k) for k in keys],
                                     [tape.constant(v) for v in values], tape)
        context = tape.value(context)
        assert abs(tape.value(weights).sum() - 1.0) <= 1e-12
        assert np.all(context >= values.min(axis=0) - 1e-12)
        assert np.all(context <= values.max(axis=0) + 1e-12)


def test_cosine_score_stays_in_unit_interval():
    rng = np.random.default_rng(13)
    spec = AttentionSpec('cosine')
    for _ in range(200):
        q = rng.normal(size=rng.integers(1, 6))
        # parallel and anti-parallel pairs sit right on the bounds
        k = rng.choice([-1.0, 1.0]) * rng.uniform(0.1, 10.0) * q if rng.random() < 0.3 else rng.normal(size=q.size)
        tape = Tape()
        c = tape.value(score(spec, tape.constant(q), tape.constant(k), tape))[0]
        assert -1.0 <= c <= 1.0
