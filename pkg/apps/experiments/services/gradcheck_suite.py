"""
Finite-difference suite over every differentiable operation and composed
model, each probed at several random seeds.

Every check builds a small random instance, hands its parameters to
``grad_check`` by name and records the resulting report.
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from services.engine.gradcheck import GradCheckReport, grad_check
from services.engine.tape import Tape
from services.networks.dual_stage import DualStageModel, ds_forward
from services.networks.memory import MemNet, load_memory, memnet_forward
from services.networks.params import ModelParams, ParamInitializer
from services.networks.plasticity import Episode, PlasticLayer, episode_loss
from services.networks.primitives import AttentionSpec, DenseLayer, attention, dense_forward, self_attention
from services.networks.sequence import EncoderDecoder, LstmCell, RnnCell, cell_step, rnn_step, seq2seq_forward
from services.systems.ode import OdeProblem, euler_solve, linear_derivative, neural_derivative
from services.training.losses import loss_mse, sequence_mse

logger = logging.getLogger(__name__)

# check(rng, step, tol) -> one report per probed configuration
Check = Callable[[np.random.Generator, float, float], List[GradCheckReport]]


@dataclass
class ModuleResult:
    module: str
    reports: List[GradCheckReport] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(report.passed for report in self.reports)

    @property
    def max_rel_error(self) -> float:
        return max((report.max_rel_error for report in self.reports), default=0.0)

    def as_dict(self) -> dict:
        return {
            'module': self.module,
            'passed': self.passed,
            'checks': len(self.reports),
            'max_rel_error': self.max_rel_error,
        }


def _model_check(params: ModelParams, builder: Callable[[Tape], int], step: float, tol: float) -> GradCheckReport:
    """Check a model whose parameters are looked up on the tape by name."""
    point = {name: np.array(value) for name, value in params.items()}
    return grad_check(lambda tape, *nodes: builder(tape), point, step=step, tol=tol)


def _sum_sq(tape: Tape, node: int) -> int:
    return tape.sum(tape.mul(node, node))


# --- elementary operations ---------------------------------------------------------

def check_autodiff(rng, step, tol) -> List[GradCheckReport]:
    a, b = rng.normal(size=4), rng.normal(size=4)
    m = rng.normal(size=(3, 4))
    positive = rng.uniform(0.5, 2.0, size=4)
    builders = [
        (lambda t, x, y: t.sum(t.mul(t.add(x, y), t.sub(x, y))), [a, b]),
        (lambda t, x, y: t.sum(t.div(x, y)), [a, positive]),
        (lambda t, w, x: _sum_sq(t, t.matvec(w, x)), [m, a]),
        (lambda t, x: t.sum(t.tanh(x)), [a]),
        (lambda t, x: t.sum(t.sigmoid(x)), [a]),
        (lambda t, x: t.sum(t.exp(x)), [a]),
        (lambda t, x: t.sum(t.add(t.sin(x), t.cos(x))), [a]),
        (lambda t, x, y: _sum_sq(t, t.mul(t.softmax(x), y)), [a, b]),
        (lambda t, x, y: _sum_sq(t, t.concat(x, t.scale(y, 0.5))), [a, b]),
        (lambda t, x, y: t.dot(x, y), [a, b]),
        (lambda t, x, y: t.cosine(x, y), [a, b]),
        (lambda t, g, x, y: t.sum(t.branch_mix(g, x, y)), [rng.uniform(0.1, 0.9, size=1), a, b]),
        (lambda t, x: _sum_sq(t, t.slice(x, 1, 3)), [a]),
        (lambda t, x, y: _sum_sq(t, t.outer(x, y)), [a, b]),
        (lambda t, k, x: t.sum(t.scalar_mul(k, x)), [rng.normal(size=1), a]),
        (lambda t, w, x, y: _sum_sq(t, t.weighted_sum(t.softmax(w), [x, y])), [rng.normal(size=2), a, b]),
    ]
    return [grad_check(builder, point, step=step, tol=tol) for builder, point in builders]


# --- network primitives ------------------------------------------------------------

def check_primitives(rng, step, tol) -> List[GradCheckReport]:
    init = ParamInitializer(rng)
    params = ModelParams()
    layers = [
        DenseLayer.create(params, 'dense.0', 4, 3, init, activation='tanh'),
        DenseLayer.create(params, 'dense.1', 3, 3, init, activation='softmax'),
    ]
    x = rng.normal(size=4)

    def dense(tape):
        out = tape.constant(x)
        for layer in layers:
            out = dense_forward(layer, out, tape)
        return loss_mse(out, np.array([0.2, 0.5, 0.3]), tape)

    reports = [_model_check(params, dense, step, tol)]
    for kind in ('feedforward', 'cosine'):
        params = ModelParams()
        spec = AttentionSpec.create(params, 'attn', 3, 3, init, kind, hidden=4)
        params.add('query', rng.normal(size=3))
        for i in range(4):
            params.add(f'key.{i}', rng.normal(size=3))

        def attend(tape, spec=spec, params=params):
            q = tape.param('query', params['query'])
            keys = [tape.param(f'key.{i}', params[f'key.{i}']) for i in range(4)]
            context, _ = attention(spec, q, keys, keys, tape)
            mixed = self_attention(spec, keys[:2], tape)
            return tape.add(_sum_sq(tape, context), _sum_sq(tape, mixed[0]))

        reports.append(_model_check(params, attend, step, tol))
    return reports


# --- sequence models ---------------------------------------------------------------

def check_sequence(rng, step, tol) -> List[GradCheckReport]:
    init = ParamInitializer(rng)
    reports = []

    params = ModelParams()
    rnn = RnnCell.create(params, 'rnn', 2, 3, init, out_dim=1)
    X = rng.normal(size=(8, 2))

    def rnn_loss(tape):
        h, y = tape.constant(np.zeros(3)), None
        for x in X:
            h, y = rnn_step(rnn, x, h, tape)
        return loss_mse(y, np.array([0.3]), tape)

    reports.append(_model_check(params, rnn_loss, step, tol))

    params = ModelParams()
    lstm = LstmCell.create(params, 'lstm', 2, 3, init)
    X = rng.normal(size=(6, 2))

    def lstm_loss(tape):
        state = lstm.initial_state(tape)
        for x in X:
            state = cell_step(lstm, x, state, tape)
        return _sum_sq(tape, state[0])

    reports.append(_model_check(params, lstm_loss, step, tol))

    X = list(rng.normal(size=(6, 2)))
    targets = list(rng.normal(size=(3, 1)))
    variants = [
        dict(cell='rnn', score_kind=None),
        dict(cell='rnn', score_kind='feedforward'),
        dict(cell='lstm', score_kind='feedforward'),
        dict(cell='rnn', score_kind='cosine'),
        dict(cell='rnn', score_kind='feedforward', bidirectional=True),
    ]
    for variant in variants:
        params = ModelParams()
        model = EncoderDecoder.create(params, init, 2, 1, 3, score_hidden=3, **variant)

        def seq2seq_loss(tape, model=model):
            outputs, _ = seq2seq_forward(model, X, len(targets), tape)
            return sequence_mse(outputs, targets, tape)

        reports.append(_model_check(params, seq2seq_loss, step, tol))
    return reports


def check_dual_stage(rng, step, tol) -> List[GradCheckReport]:
    init = ParamInitializer(rng)
    X = rng.normal(size=(6, 4))
    targets = list(rng.normal(size=(2, 1)))
    reports = []
    for cell in ('rnn', 'lstm'):
        params = ModelParams()
        model = DualStageModel.create(params, init, n=4, T=6, hidden=3, cell=cell, score_hidden=3)

        def ds_loss(tape, model=model):
            predictions, _, _ = ds_forward(model, X, tape, steps=len(targets))
            return sequence_mse(predictions, targets, tape)

        reports.append(_model_check(params, ds_loss, step, tol))
    return reports


def check_memory(rng, step, tol) -> List[GradCheckReport]:
    init = ParamInitializer(rng)
    params = ModelParams()
    model = MemNet.create(params, init, n=3, d=4, o=1, capacity=5)
    load_memory(model, list(rng.normal(size=(5, 3))))
    x_t, y_prev = rng.normal(size=3), rng.normal(size=1)

    def memory_loss(tape):
        y, _ = memnet_forward(model, x_t, y_prev, tape)
        return loss_mse(y, np.array([0.4]), tape)

    return [_model_check(params, memory_loss, step, tol)]


def check_plasticity(rng, step, tol) -> List[GradCheckReport]:
    init = ParamInitializer(rng)
    patterns = np.sign(rng.normal(size=(2, 4)))
    cue = patterns[0] * np.array([1.0, 1.0, 0.0, 0.0])
    drives = [patterns[0], patterns[1], np.zeros(4), cue, np.zeros(4)]
    episode = Episode(patterns=patterns, cue=cue, target=patterns[0], drives=drives)
    reports = []
    for learn_eta in (False, True):
        params = ModelParams()
        layer = PlasticLayer.create(params, init, 4, 4, eta=0.3, learn_eta=learn_eta, alpha_init=0.2)
        reports.append(_model_check(params, lambda tape, layer=layer: episode_loss(layer, episode, tape), step, tol))
    return reports


def check_ode(rng, step, tol) -> List[GradCheckReport]:
    theta, x0 = rng.uniform(-1.0, 1.0, size=1), rng.uniform(0.5, 1.5, size=1)

    def linear(tape, theta_node, x0_node):
        final = euler_solve(OdeProblem(linear_derivative(theta_node), x0_node, (0.0, 1.0), 50), tape)
        return _sum_sq(tape, final)

    init = ParamInitializer(rng)
    params = ModelParams()
    layers = [
        DenseLayer.create(params, 'f.0', 2, 3, init, activation='tanh'),
        DenseLayer.create(params, 'f.1', 3, 2, init),
    ]
    start = rng.normal(size=2)

    def neural(tape):
        final = euler_solve(OdeProblem(neural_derivative(layers), start, (0.0, 1.0), 50), tape)
        return loss_mse(final, np.zeros(2), tape)

    return [grad_check(linear, [theta, x0], step=step, tol=tol), _model_check(params, neural, step, tol)]


MODULES: Dict[str, Check] = {
    'autodiff': check_autodiff,
    'primitives': check_primitives,
    'sequence': check_sequence,
    'dual_stage': check_dual_stage,
    'memory': check_memory,
    'plasticity': check_plasticity,
    'ode': check_ode,
}
# Episodes unroll long products of tanh derivatives; their checks use the looser tolerance.
LOOSE_MODULES = ('plasticity',)


def run_suite(
    modules: Optional[Sequence[str]] = None,
    seeds: int = 20,
    step: float = 1e-6,
    tol: float = 1e-5,
    loose_tol: float = 1e-4,
) -> List[ModuleResult]:
    """
    Run the named modules (all by default) at seeds 0 .. seeds-1.

    Returns:
        One ModuleResult per module, in suite order.
    """
    names = list(modules) if modules else list(MODULES)
    unknown = [name for name in names if name not in MODULES]
    if unknown:
        raise KeyError(f"unknown gradcheck module(s): {', '.join(unknown)} (expected {', '.join(MODULES)})")
    results = []
    for name in names:
        result = ModuleResult(module=name)
        module_tol = loose_tol if name in LOOSE_MODULES else tol
        for seed in range(seeds):
            result.reports.extend(MODULES[name](np.random.default_rng(seed), step, module_tol))
        level = logging.INFO if result.passed else logging.WARNING
        logger.log(level, f"gradcheck {name}: {len(result.reports)} checks, max rel error {result.max_rel_error:.3e}")
        results.append(result)
    return results
