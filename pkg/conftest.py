"""Shared fixtures for the test suite."""
import factory
import numpy as np
import pytest

from apps.experiments.models import ExperimentRun
from services.engine.tape import Tape
from services.networks.params import ModelParams, ParamInitializer


class ExperimentRunFactory(factory.django.DjangoModelFactory):
    class Meta:
        model = ExperimentRun

    name = factory.Sequence(lambda n: f'experiment-{n}')
    kind = 'linear'
    seed = 0
    status = ExperimentRun.Status.QUEUED
    config = factory.LazyAttribute(lambda run: {'name': run.name, 'kind': run.kind, 'seed': run.seed})


@pytest.fixture
def tape():
    return Tape()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def params():
    return ModelParams()


@pytest.fixture
def init(rng):
    return ParamInitializer(rng)


@pytest.fixture
def output_root(tmp_path, settings):
    settings.DP_OUTPUT_ROOT = tmp_path / 'runs'
    settings.DP_SEED = None
    return settings.DP_OUTPUT_ROOT


def write_config(path, text):
    path.write_text(text, encoding='utf-8')
    return path


@pytest.fixture
def linear_config_text(tmp_path):
    return (
        "[experiment]\nname = linear-sanity\n\n"
        "[model]\nkind = linear\nwindow = 3\n\n"
        "[data]\nsource = linear\nlength = 120\n\n"
        "[optim]\neta = 0.05\nepochs = 3\nseed = 7\n\n"
        f"[output]\ndir = {tmp_path / 'model'}\n"
    )
