from dataclasses import dataclass
from typing import List

import numpy as np

from toptune.errors import StrategyError
from toptune.model.config import ModelConfig
from toptune.numeric.params import ParamStore
from toptune.tokenizer.tokenizer import Tokenizer

EMBEDDINGS = "embed.tokens"


@dataclass(frozen=True)
class SpecialEmbeddings:
    """The appended label rows of the shared embedding matrix."""
    rows: List[int]
    labels: List[str]
    width: int

    @property
    def count(self) -> int:
        return len(self.rows) * self.width

    def row_mask(self, vocab_size: int) -> np.ndarray:
        mask = np.zeros(vocab_size, dtype=bool)
        mask[self.rows] = True
        return mask


def expand_embeddings(store: ParamStore, tokenizer: Tokenizer, config: ModelConfig):
    """
    Grows `embed.tokens` from the base vocabulary to the tokenizer's full
    vocabulary. Each label row starts as the mean of the base rows of the
    label's subword split. Returns the widened config and the special rows.
    """
    vocab = tokenizer.vocab
    table = store[EMBEDDINGS]
    if table.shape[0] == len(vocab):
        rows = vocab.special_ids()
        return config.with_vocab_size(len(vocab)), SpecialEmbeddings(rows, list(vocab.special), table.shape[1])
    if table.shape[0] != vocab.base_size:
        raise StrategyError(f"embedding table has {table.shape[0]} rows, tokenizer base region has {vocab.base_size}")
    base = table[:vocab.base_size]
    extra = np.stack([tokenizer.averaged_init(label, base) for label in vocab.special]) if vocab.special else \
        np.zeros((0, table.shape[1]), dtype=table.dtype)
    trainable = store.trainable_mask[EMBEDDINGS]
    store.replace(EMBEDDINGS, np.concatenate([table, extra], axis=0))
    store.set_trainable(EMBEDDINGS, trainable)
    rows = vocab.special_ids()
    return config.with_vocab_size(len(vocab)), SpecialEmbeddings(rows, list(vocab.special), table.shape[1])
