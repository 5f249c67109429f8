"""Forms for experiment configuration validation."""
from pathlib import Path

from django import forms
from django.conf import settings

from services.networks.primitives import SCORE_KINDS
from services.systems.maps import DEFAULT_THETA
from services.training.optim import OPTIMIZERS

MODEL_KINDS = (
    'rnn', 'lstm', 'encdec', 'encdec-attn', 'dual-stage', 'memnet', 'plastic', 'ode-demo', 'linear', 'narx',
)
SERIES_SOURCES = tuple(DEFAULT_THETA) + ('interdependent', 'periodic', 'driven-features', 'linear', 'csv')
DATA_SOURCES = SERIES_SOURCES + ('lag-recall', 'pattern-completion', 'projectile')

# model kind -> sources it can train on
KIND_SOURCES = {
    'plastic': ('pattern-completion',),
    'ode-demo': ('projectile',),
    'encdec': SERIES_SOURCES + ('lag-recall',),
    'encdec-attn': SERIES_SOURCES + ('lag-recall',),
}
MULTI_STEP_KINDS = ('encdec', 'encdec-attn', 'dual-stage')


def _choices(values):
    return [(value, value) for value in values]


def parse_list(text: str, cast=float) -> list:
    """'1, 2.5,3' -> [1.0, 2.5, 3.0]; empty text gives an empty list."""
    text = (text or '').strip()
    if not text:
        return []
    return [cast(item.strip()) for item in text.split(',') if item.strip()]


class ExperimentConfigForm(forms.Form):
    """Typed, range-checked view of an experiment INI file."""

    # [experiment]
    name = forms.CharField(max_length=100, initial='experiment')

    # [model]
    kind = forms.ChoiceField(choices=_choices(MODEL_KINDS))
    cell = forms.ChoiceField(choices=_choices(('rnn', 'lstm')), initial='rnn')
    hidden = forms.IntegerField(min_value=1, initial=16)
    window = forms.IntegerField(min_value=1, initial=10)
    output_steps = forms.IntegerField(min_value=1, initial=1)
    bidirectional = forms.BooleanField(required=False, initial=False)
    score_kind = forms.ChoiceField(choices=_choices(SCORE_KINDS), initial='feedforward')
    input_score = forms.ChoiceField(choices=_choices(SCORE_KINDS), initial='feedforward')
    score_hidden = forms.IntegerField(min_value=1, initial=settings.DIFFERENTIABLE_ENGINE['SCORE_HIDDEN'])
    head = forms.ChoiceField(choices=_choices(('linear', 'softmax')), initial='linear')
    hidden_sizes = forms.CharField(required=False, initial='16')
    activation = forms.ChoiceField(choices=_choices(('tanh', 'sigmoid', 'identity')), initial='tanh')
    memory_dim = forms.IntegerField(min_value=1, initial=16)
    memory_lag = forms.IntegerField(min_value=1, initial=5)
    capacity = forms.IntegerField(min_value=1, initial=64)
    plastic_eta = forms.FloatField(min_value=0.0, max_value=1.0, initial=0.1)
    learn_eta = forms.BooleanField(required=False, initial=False)

    # [data]
    source = forms.ChoiceField(choices=_choices(DATA_SOURCES))
    theta = forms.CharField(required=False, initial='')
    h0 = forms.CharField(required=False, initial='')
    length = forms.IntegerField(min_value=2, initial=500)
    sequences = forms.IntegerField(min_value=1, initial=200)
    lag = forms.IntegerField(min_value=1, initial=30)
    path = forms.CharField(required=False, initial='')
    input_columns = forms.CharField(required=False, initial='')
    target_columns = forms.CharField(required=False, initial='')
    horizon = forms.IntegerField(min_value=1, initial=1)
    normalize = forms.BooleanField(required=False, initial=True)
    noise = forms.FloatField(min_value=0.0, initial=0.05)
    features = forms.IntegerField(min_value=1, initial=10)
    train_fraction = forms.FloatField(min_value=0.0, max_value=1.0, initial=0.7)
    val_fraction = forms.FloatField(min_value=0.0, max_value=1.0, initial=0.15)
    patterns = forms.IntegerField(min_value=1, initial=3)
    degrade = forms.FloatField(min_value=0.0, max_value=1.0, initial=0.5)
    sim_steps = forms.IntegerField(min_value=1, initial=200)
    v_max = forms.FloatField(min_value=0.0, initial=30.0)

    # [optim]
    eta = forms.FloatField(initial=0.01)
    epochs = forms.IntegerField(min_value=0, initial=100)
    batch_size = forms.IntegerField(min_value=1, initial=1)
    seed = forms.IntegerField(min_value=0, initial=0)
    clip_norm = forms.FloatField(required=False)
    optimizer = forms.ChoiceField(choices=_choices(OPTIMIZERS), initial='sgd')
    momentum = forms.FloatField(min_value=0.0, max_value=1.0, initial=0.9)

    # [output]
    dir = forms.CharField(required=False, initial='')

    def clean_eta(self):
        eta = self.cleaned_data['eta']
        if eta <= 0:
            raise forms.ValidationError('Learning rate must be positive.')
        return eta

    def clean_clip_norm(self):
        clip = self.cleaned_data.get('clip_norm')
        if clip is not None and clip <= 0:
            raise forms.ValidationError('Clip norm must be positive.')
        return clip

    def clean_v_max(self):
        v_max = self.cleaned_data.get('v_max')
        if v_max is not None and v_max <= 0:
            raise forms.ValidationError('Launch speed limit must be positive.')
        return v_max

    def clean_path(self):
        path = self.cleaned_data.get('path', '')
        if path and not Path(path).is_file():
            raise forms.ValidationError(f'Data file does not exist: {path}')
        return path

    def _clean_list(self, field: str, cast):
        try:
            return parse_list(self.cleaned_data.get(field, ''), cast)
        except ValueError:
            self.add_error(field, f'Expected a comma-separated list of numbers, got {self.cleaned_data[field]!r}.')
            return []

    def clean(self):
        cleaned = super().clean()
        kind, source = cleaned.get('kind'), cleaned.get('source')
        if kind and source:
            allowed = KIND_SOURCES.get(kind, SERIES_SOURCES)
            if source not in allowed:
                self.add_error('source', f'Model kind {kind!r} cannot train on source {source!r}.')
        if source == 'csv' and not cleaned.get('path'):
            self.add_error('path', 'A CSV source needs a path.')
        if kind and kind not in MULTI_STEP_KINDS and cleaned.get('output_steps', 1) != 1:
            self.add_error('output_steps', f'Model kind {kind!r} forecasts a single step.')
        if kind in ('encdec', 'encdec-attn') and cleaned.get('bidirectional') and cleaned.get('score_kind') == 'cosine':
            self.add_error('score_kind', 'Cosine scores cannot compare a bidirectional encoder with the decoder.')
        if source == 'lag-recall' and cleaned.get('lag', 1) >= cleaned.get('window', 1):
            self.add_error('lag', 'The recall lag must be shorter than the window.')
        if cleaned.get('train_fraction', 0) + cleaned.get('val_fraction', 0) > 1.0:
            self.add_error('val_fraction', 'Train and validation fractions exceed 1.')
        for field in ('theta', 'h0'):
            cleaned[field] = self._clean_list(field, float)
        for field in ('hidden_sizes', 'input_columns', 'target_columns'):
            cleaned[field] = self._clean_list(field, int)
        if any(size < 1 for size in cleaned.get('hidden_sizes', [])):
            self.add_error('hidden_sizes', 'Layer sizes must be positive.')
        return cleaned
