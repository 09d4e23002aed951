import numpy as np
import pytest

from slfnet.data import GrammarConfig, build_vocab, generate_synthetic
from slfnet.model import ModelParams
from slfnet.training import TrainConfig


def tiny_grammar(seed=5, **overrides):
    """Small vocabulary, short sentences; good for unit-level checks."""
    base = dict(action_phrases=["turn on", "turn off", "open", "close"],
                object_phrases=["light", "fan", "door"],
                location_phrases=["kitchen", "garage"],
                connectors=["and"], k_weights=[0.6, 0.4],
                p_omit_location=0.3, p_omit_object=0.1, seed=seed)
    base.update(overrides)
    return GrammarConfig(**base)


def tiny_model(examples, d=8, seed=2, **config_overrides):
    config = TrainConfig(d=d, seed=seed, **config_overrides)
    model = ModelParams.initialize(build_vocab(examples),
                                   config.model_config(), seed=seed)
    return model, config


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def small_corpus():
    return generate_synthetic(tiny_grammar(), 12)
