import copy

import pytest

from toptune.datagen.generate import generate
from toptune.datagen.grammar import grammar_from_dict
from toptune.model.config import ModelConfig
from toptune.model.transformer import init_params
from toptune.semantics.tree import label_openers
from toptune.tokenizer.tokenizer import Tokenizer

SMALL_GRAMMAR = {
    "name": "small",
    "domain": "food",
    "max_depth": 4,
    "intents": {
        "IN:ORDER": {"weight": 2, "templates": [
            "order {SL:DISH} please",
            {"pattern": "i want {SL:DISH} from {SL:PLACE}", "weight": 2},
        ]},
        "IN:CANCEL": {"weight": 1, "templates": ["cancel my order"]},
        "IN:GET_PLACE": {"templates": ["the place near {SL:CITY}"]},
    },
    "slots": {
        "SL:DISH": {"words": ["pizza", "pasta", "green salad"]},
        "SL:PLACE": {"words": ["luigi", "the corner"], "nested": {"IN:GET_PLACE": 1}},
        "SL:CITY": {"words": ["paris", "rome"]},
    },
}


def toy_config(vocab_size: int = 50, max_positions: int = 32) -> ModelConfig:
    return ModelConfig(encoder_layers=2, decoder_layers=2, heads=2, hid_dim=16, ffn_dim=32,
                       vocab_size=vocab_size, max_positions=max_positions, precision="float64")


@pytest.fixture
def config():
    return toy_config()


@pytest.fixture
def store(config):
    return init_params(config, seed=0)


@pytest.fixture(scope="session")
def small_grammar():
    return grammar_from_dict(SMALL_GRAMMAR)


@pytest.fixture(scope="session")
def corpus(small_grammar):
    return [example.decoupled() for example in generate(small_grammar, 60, seed=0)]


@pytest.fixture(scope="session")
def tokenizer(corpus):
    return Tokenizer.build([example.utterance for example in corpus], target_size=300)


@pytest.fixture(scope="session")
def special_tokenizer(tokenizer, corpus):
    openers = sorted({opener for example in corpus for opener in label_openers(example.tree)})
    return tokenizer.with_labels(openers)


@pytest.fixture
def model_config(tokenizer):
    """Toy model sized to the trained tokenizer's base vocabulary."""
    return toy_config(vocab_size=len(tokenizer), max_positions=96)


@pytest.fixture
def small_grammar_data():
    return copy.deepcopy(SMALL_GRAMMAR)
