from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Tuple, Union

import numpy as np

from toptune.config.base import END_OF_WORD, RESERVED_TOKENS, UNK_TOKEN
from toptune.errors import TokenizerError
from toptune.tokenizer.vocabulary import Vocabulary


@dataclass(frozen=True)
class MergeRules:
    pairs: Tuple[Tuple[str, str], ...]
    _ranks: Dict[Tuple[str, str], int] = field(default=None, compare=False, repr=False)
    _cache: Dict[str, Tuple[str, ...]] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_ranks", {pair: rank for rank, pair in enumerate(self.pairs)})
        object.__setattr__(self, "_cache", {})

    def __len__(self) -> int:
        return len(self.pairs)

    def segment(self, word: str) -> Tuple[str, ...]:
        """Splits one whitespace-free word into subword symbols by applying merges in rank order."""
        cached = self._cache.get(word)
        if cached is not None:
            return cached
        symbols = list(_word_symbols(word))
        while len(symbols) > 1:
            ranked = [(self._ranks.get(pair, len(self.pairs)), i)
                      for i, pair in enumerate(zip(symbols, symbols[1:]))]
            rank, i = min(ranked)
            if rank == len(self.pairs):
                break
            symbols[i:i + 2] = [symbols[i] + symbols[i + 1]]
        result = tuple(symbols)
        self._cache[word] = result
        return result


def _word_symbols(word: str) -> Tuple[str, ...]:
    return tuple(word[:-1]) + (word[-1] + END_OF_WORD,)


def train_bpe(corpus: Sequence[str], target_size: int, alphabet: str = "") -> Tuple[Vocabulary, MergeRules]:
    """
    Learns merges until the learned region (characters plus merged symbols)
    reaches `target_size` or no pair is left. Ties in pair frequency go to the
    lexicographically smallest pair. Reserved tokens precede the learned region.
    """
    if not corpus:
        raise TokenizerError("train_bpe needs a non-empty corpus")
    word_counts = Counter(word for text in corpus for word in text.split())
    words = {word: list(_word_symbols(word)) for word in sorted(word_counts)}

    inventory = set(symbol for symbols in words.values() for symbol in symbols)
    for char in alphabet:
        if not char.isspace():
            inventory.update((char, char + END_OF_WORD))
    if target_size < len(inventory):
        raise TokenizerError(f"target_size {target_size} is smaller than the character inventory {len(inventory)}")

    entries = sorted(inventory)
    known = set(entries)
    merges: List[Tuple[str, str]] = []
    while len(entries) < target_size:
        pair_counts: Counter = Counter()
        for word, symbols in words.items():
            count = word_counts[word]
            for pair in zip(symbols, symbols[1:]):
                pair_counts[pair] += count
        if not pair_counts:
            break
        best = min(pair_counts.items(), key=lambda item: (-item[1], item[0]))[0]
        merged = best[0] + best[1]
        merges.append(best)
        if merged not in known:
            known.add(merged)
            entries.append(merged)
        for word, symbols in words.items():
            words[word] = _merge_pair(symbols, best, merged)

    vocab = Vocabulary(tuple(RESERVED_TOKENS) + tuple(entries))
    return vocab, MergeRules(tuple(merges))


def _merge_pair(symbols: List[str], pair: Tuple[str, str], merged: str) -> List[str]:
    out, i = [], 0
    while i < len(symbols):
        if i < len(symbols) - 1 and symbols[i] == pair[0] and symbols[i + 1] == pair[1]:
            out.append(merged)
            i += 2
        else:
            out.append(symbols[i])
            i += 1
    return out


def encode(text: str, vocab: Vocabulary, rules: MergeRules, use_special: bool = True) -> List[int]:
    """
    Whitespace pre-tokenization, then for each word: an exact special label is
    one token; `[` followed by a special label becomes `[` plus the label; any
    other word goes through subword segmentation. Unknown symbols map to unk.
    """
    ids: List[int] = []
    for word in text.split():
        if use_special and vocab.special:
            if vocab.is_special_label(word):
                ids.append(vocab.id(word))
                continue
            if word.startswith("[") and vocab.is_special_label(word[1:]):
                ids.append(vocab.id("["))
                ids.append(vocab.id(word[1:]))
                continue
        ids.extend(vocab.id(symbol) for symbol in rules.segment(word))
    return ids


def decode(ids: Iterable[int], vocab: Vocabulary) -> str:
    pieces = []
    for token_id in ids:
        token_id = int(token_id)
        if token_id < 0 or token_id >= len(vocab):
            raise TokenizerError(f"token id {token_id} outside the vocabulary")
        region = vocab.region(token_id)
        surface = vocab.surface(token_id)
        if region == "reserved":
            if surface == UNK_TOKEN:
                pieces.append(UNK_TOKEN + " ")
            continue
        if region == "special":
            pieces.append(surface + " ")
        elif surface.endswith(END_OF_WORD):
            pieces.append(surface[:-len(END_OF_WORD)] + " ")
        else:
            pieces.append(surface)
    return " ".join("".join(pieces).split())


def averaged_init(label: str, base_embeddings: np.ndarray, vocab: Vocabulary, rules: MergeRules) -> np.ndarray:
    """Mean of the base embedding rows of the label's subword split (label taken bracket-stripped)."""
    label = label[1:] if label.startswith("[") else label
    ids = [vocab.id(symbol) for symbol in rules.segment(label)] if label else []
    if not ids:
        raise TokenizerError(f"label '{label}' tokenizes to zero subwords")
    return base_embeddings[ids].mean(axis=0)


def save_merges(rules: MergeRules, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        for left, right in rules.pairs:
            f.write(f"{left}\t{right}\n")
    return path


def load_merges(path: Union[str, Path]) -> MergeRules:
    pairs = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            if line.strip():
                left, right = line.rstrip("\n").split("\t")
                pairs.append((left, right))
    return MergeRules(tuple(pairs))
