"""
Experiment configuration: INI text in, a validated ExperimentConfig out.

    [experiment]
    name = lag-recall

    [model]
    kind = encdec-attn
    hidden = 32

    [data]
    source = lag-recall

    [optim]
    eta = 0.05
    epochs = 40
"""
import configparser
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Union

from django.conf import settings

from apps.core.utils import safe_filename
from services.engine.errors import ConfigError
from services.training.optim import OptimConfig

from ..forms import ExperimentConfigForm

logger = logging.getLogger(__name__)

SECTIONS: Dict[str, tuple] = {
    'experiment': ('name',),
    'model': (
        'kind', 'cell', 'hidden', 'window', 'output_steps', 'bidirectional', 'score_kind', 'input_score',
        'score_hidden', 'head', 'hidden_sizes', 'activation', 'memory_dim', 'memory_lag', 'capacity',
        'plastic_eta', 'learn_eta',
    ),
    'data': (
        'source', 'theta', 'h0', 'length', 'sequences', 'lag', 'path', 'input_columns', 'target_columns',
        'horizon', 'normalize', 'noise', 'features', 'train_fraction', 'val_fraction', 'patterns', 'degrade',
        'sim_steps', 'v_max',
    ),
    'optim': ('eta', 'epochs', 'batch_size', 'seed', 'clip_norm', 'optimizer', 'momentum'),
    'output': ('dir',),
}
_BOOLEAN_FIELDS = ('bidirectional', 'learn_eta', 'normalize')
_LIST_FIELDS = ('theta', 'h0', 'hidden_sizes', 'input_columns', 'target_columns')


@dataclass
class ExperimentConfig:
    name: str
    kind: str
    source: str
    optim: OptimConfig
    cell: str = 'rnn'
    hidden: int = 16
    window: int = 10
    output_steps: int = 1
    bidirectional: bool = False
    score_kind: str = 'feedforward'
    input_score: str = 'feedforward'
    score_hidden: int = 16
    head: str = 'linear'
    hidden_sizes: List[int] = field(default_factory=lambda: [16])
    activation: str = 'tanh'
    memory_dim: int = 16
    memory_lag: int = 5
    capacity: int = 64
    plastic_eta: float = 0.1
    learn_eta: bool = False
    theta: List[float] = field(default_factory=list)
    h0: List[float] = field(default_factory=list)
    length: int = 500
    sequences: int = 200
    lag: int = 30
    path: str = ''
    input_columns: List[int] = field(default_factory=list)
    target_columns: List[int] = field(default_factory=list)
    horizon: int = 1
    normalize: bool = True
    noise: float = 0.05
    features: int = 10
    train_fraction: float = 0.7
    val_fraction: float = 0.15
    patterns: int = 3
    degrade: float = 0.5
    sim_steps: int = 200
    v_max: float = 30.0
    dir: str = ''

    @property
    def seed(self) -> int:
        return self.optim.seed

    @property
    def splits(self) -> tuple:
        return (self.train_fraction, self.val_fraction, max(0.0, 1.0 - self.train_fraction - self.val_fraction))

    @property
    def output_dir(self) -> Path:
        if self.dir:
            return Path(self.dir)
        return Path(settings.DP_OUTPUT_ROOT) / safe_filename(self.name)

    def with_seed(self, seed: int) -> 'ExperimentConfig':
        values = self.flat()
        values['seed'] = seed
        return build_config(values)

    def flat(self) -> dict:
        values = asdict(self)
        values.update(values.pop('optim'))
        return values

    def to_ini(self) -> str:
        """Canonical INI text; parsing it gives back an equal config."""
        values = self.flat()
        lines = []
        for section, keys in SECTIONS.items():
            lines.append(f'[{section}]')
            for key in keys:
                value = values[key]
                if key in _LIST_FIELDS:
                    value = ', '.join(str(item) for item in value)
                elif value is None:
                    value = ''
                elif isinstance(value, bool):
                    value = 'true' if value else 'false'
                elif isinstance(value, float):
                    value = repr(value)
                lines.append(f'{key} = {value}')
            lines.append('')
        return '\n'.join(lines)


def _defaults() -> dict:
    form = ExperimentConfigForm()
    return {name: f.initial for name, f in form.fields.items() if f.initial is not None}


def build_config(values: dict) -> ExperimentConfig:
    """
    Validate a flat key -> value mapping (strings or typed values) with
    ExperimentConfigForm.

    Raises:
        ConfigError: listing every invalid field
    """
    data = _defaults()
    for key, value in values.items():
        if key in _BOOLEAN_FIELDS and isinstance(value, str):
            lowered = value.strip().lower()
            if lowered not in configparser.ConfigParser.BOOLEAN_STATES:
                raise ConfigError(f"{key}: expected a boolean, got {value!r}")
            value = configparser.ConfigParser.BOOLEAN_STATES[lowered]
        elif key in _LIST_FIELDS and isinstance(value, (list, tuple)):
            value = ', '.join(str(item) for item in value)
        data[key] = value
    form = ExperimentConfigForm(data=data)
    if not form.is_valid():
        problems = '; '.join(
            f"{name}: {' '.join(str(message) for message in messages)}" for name, messages in form.errors.items()
        )
        raise ConfigError(f"invalid experiment config: {problems}")

    cleaned = dict(form.cleaned_data)
    optim = OptimConfig(
        eta=cleaned.pop('eta'),
        epochs=cleaned.pop('epochs'),
        batch_size=cleaned.pop('batch_size'),
        seed=cleaned.pop('seed'),
        clip_norm=cleaned.pop('clip_norm'),
        optimizer=cleaned.pop('optimizer'),
        momentum=cleaned.pop('momentum'),
    )
    return ExperimentConfig(optim=optim, **cleaned)


def parse_config_text(text: str, source: str = '<string>') -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from exc

    values = {}
    for section in parser.sections():
        if section not in SECTIONS:
            raise ConfigError(f"{source}: unknown section [{section}] (expected {', '.join(SECTIONS)})")
        for key, value in parser.items(section):
            if key not in SECTIONS[section]:
                raise ConfigError(f"{source}: unknown key {key!r} in [{section}]")
            values[key] = value
    return build_config(values)


def load_config(path: Union[str, Path], seed: Optional[int] = None) -> ExperimentConfig:
    """
    Read and validate an experiment file. The seed comes from ``seed`` if
    given, else from DP_SEED when set, else from the file.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    config = parse_config_text(path.read_text(encoding='utf-8'), source=str(path))
    override = seed if seed is not None else getattr(settings, 'DP_SEED', None)
    if override is not None and override != config.seed:
        logger.info(f"{config.name}: seed {config.seed} overridden to {override}")
        config = config.with_seed(override)
    return config
