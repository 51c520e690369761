from pathlib import Path
from typing import Iterable, List, Sequence, Union

import numpy as np

from toptune.config.base import DEFAULT_VOCAB_SIZE, MERGES_FILE, SEED_TEXT, VOCAB_FILE
from toptune.helpers.logs import Log
from toptune.tokenizer import bpe
from toptune.tokenizer.vocabulary import Vocabulary, add_special_labels, load_vocabulary, save_vocabulary


class Tokenizer:
    """A vocabulary plus its merge rules, with the seq2seq framing helpers the model needs."""

    def __init__(self, vocab: Vocabulary, rules: bpe.MergeRules):
        self.vocab = vocab
        self.rules = rules

    @classmethod
    def build(cls, corpus: Sequence[str], target_size: int = DEFAULT_VOCAB_SIZE,
              seed_text: str = SEED_TEXT) -> "Tokenizer":
        """Trains on natural-language text only (utterances plus the seed text)."""
        texts = list(corpus) + [seed_text]
        vocab, rules = bpe.train_bpe(texts, target_size, alphabet=seed_text)
        Log.info(f"Tokenizer trained: {vocab.base_size} base entries, {len(rules)} merges")
        return cls(vocab, rules)

    def __len__(self) -> int:
        return len(self.vocab)

    @property
    def has_specials(self) -> bool:
        return bool(self.vocab.special)

    def with_labels(self, labels: Iterable[str]) -> "Tokenizer":
        return Tokenizer(add_special_labels(self.vocab, labels), self.rules)

    def base(self) -> "Tokenizer":
        return Tokenizer(self.vocab.without_specials(), self.rules)

    def encode(self, text: str, use_special: bool = True) -> List[int]:
        return bpe.encode(text, self.vocab, self.rules, use_special)

    def encode_target(self, text: str, max_length: int = 0) -> List[int]:
        """bos + tokens + eos, truncated to `max_length` tokens when given."""
        ids = [self.vocab.bos_id] + self.encode(text, self.has_specials) + [self.vocab.eos_id]
        if max_length and len(ids) > max_length:
            ids = ids[:max_length - 1] + [self.vocab.eos_id]
        return ids

    def encode_source(self, text: str, max_length: int = 0) -> List[int]:
        ids = self.encode(text, False) + [self.vocab.eos_id]
        if max_length and len(ids) > max_length:
            ids = ids[:max_length - 1] + [self.vocab.eos_id]
        return ids

    def decode(self, ids: Iterable[int]) -> str:
        return bpe.decode(ids, self.vocab)

    def averaged_init(self, label: str, base_embeddings: np.ndarray) -> np.ndarray:
        return bpe.averaged_init(label, base_embeddings, self.vocab, self.rules)

    def save(self, directory: Union[str, Path]) -> Path:
        directory = Path(directory)
        save_vocabulary(self.vocab, directory / VOCAB_FILE)
        bpe.save_merges(self.rules, directory / MERGES_FILE)
        return directory

    @classmethod
    def load(cls, directory: Union[str, Path]) -> "Tokenizer":
        directory = Path(directory)
        return cls(load_vocabulary(directory / VOCAB_FILE), bpe.load_merges(directory / MERGES_FILE))
