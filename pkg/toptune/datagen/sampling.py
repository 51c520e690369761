from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np

from toptune.config.base import DEFAULT_SPLIT_SIZES, SPIS_DEFAULT
from toptune.errors import ContractError
from toptune.helpers.logs import Log
from toptune.semantics.dataset import Example
from toptune.semantics.tree import labels


@dataclass(frozen=True)
class SpisSpec:
    spis: int = SPIS_DEFAULT
    seed: int = 0


@dataclass
class SpisSample:
    examples: List[Example]
    counts: Dict[str, int]
    shortfalls: Dict[str, int] = field(default_factory=dict)


def label_counts(examples: Sequence[Example]) -> Counter:
    """Number of examples in which each intent or slot label occurs."""
    counts: Counter = Counter()
    for example in examples:
        counts.update(set(labels(example.tree)))
    return counts


def spis_sample(corpus: Sequence[Example], spec: SpisSpec = SpisSpec()) -> SpisSample:
    """
    Greedy covering: repeatedly takes the example that lowers the most
    outstanding per-label deficits (first in a seeded shuffle on ties) until
    every label reaches `spec.spis` examples or all its examples are taken.
    Labels with fewer examples than `spec.spis` are reported as shortfalls.
    """
    if not corpus:
        raise ContractError("cannot sample from an empty corpus")
    order = np.random.default_rng(spec.seed).permutation(len(corpus))
    label_sets = [set(labels(corpus[i].tree)) for i in order]
    available = label_counts(corpus)
    deficit = {label: min(spec.spis, count) for label, count in available.items()}
    shortfalls = {label: count for label, count in sorted(available.items()) if count < spec.spis}
    for label, count in shortfalls.items():
        Log.warning(f"Label {label} occurs in only {count} examples, fewer than {spec.spis}; taking all of them")

    chosen: List[int] = []
    remaining = list(range(len(order)))
    while any(deficit.values()):
        best_position, best_gain = -1, 0
        for position, index in enumerate(remaining):
            gain = sum(1 for label in label_sets[index] if deficit[label] > 0)
            if gain > best_gain:
                best_position, best_gain = position, gain
        if best_gain == 0:
            break
        index = remaining.pop(best_position)
        chosen.append(index)
        for label in label_sets[index]:
            if deficit[label] > 0:
                deficit[label] -= 1

    examples = [corpus[order[i]] for i in chosen]
    return SpisSample(examples, dict(sorted(label_counts(examples).items())), shortfalls)


def split_corpus(corpus: Sequence[Example], sizes: Tuple[int, ...] = DEFAULT_SPLIT_SIZES,
                 seed: int = 0) -> List[List[Example]]:
    """Seeded shuffle cut into consecutive splits of the given sizes (train, dev, test)."""
    if sum(sizes) > len(corpus):
        raise ContractError(f"corpus of {len(corpus)} examples cannot fill splits {sizes}")
    order = np.random.default_rng(seed).permutation(len(corpus))
    splits, start = [], 0
    for size in sizes:
        splits.append([corpus[i] for i in order[start:start + size]])
        start += size
    return splits
