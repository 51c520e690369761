from typing import List, Tuple

import numpy as np

from toptune.datagen.grammar import Grammar
from toptune.semantics.dataset import Example
from toptune.semantics.tree import SemTree


def _group_words(items: List) -> Tuple[SemTree, ...]:
    """Adjacent words collapse into one terminal, the way bracketed text parses back."""
    children, words = [], []
    for item in items:
        if isinstance(item, str):
            words.append(item)
            continue
        if words:
            children.append(SemTree.terminal(" ".join(words)))
            words = []
        children.append(item)
    if words:
        children.append(SemTree.terminal(" ".join(words)))
    return tuple(children)


class _Sampler:

    def __init__(self, grammar: Grammar, rng: np.random.Generator):
        self.grammar = grammar
        self.rng = rng

    def _pick(self, options, weights):
        return options[int(self.rng.choice(len(options), p=weights))]

    def intent(self, label: str, budget: int) -> Tuple[SemTree, List[str]]:
        template = self._pick(*self.grammar.intent_options(label, budget))
        items, utterance = [], []
        for part in template.parts:
            if isinstance(part, tuple):
                child, words = self.slot(part[1], budget - 1)
                items.append(child)
                utterance.extend(words)
            else:
                items.append(part)
                utterance.append(part)
        return SemTree.intent(label, *_group_words(items)), utterance

    def slot(self, label: str, budget: int) -> Tuple[SemTree, List[str]]:
        choice = self._pick(*self.grammar.slot_options(label, budget))
        if choice is None:
            words = self.grammar.slots[label].words
            phrase = words[int(self.rng.integers(len(words)))]
            return SemTree.slot(label, SemTree.terminal(phrase)), phrase.split()
        child, utterance = self.intent(choice, budget - 1)
        return SemTree.slot(label, child), utterance


def generate(grammar: Grammar, count: int, seed: int = 0) -> List[Example]:
    """`count` utterance/tree pairs; the same seed always yields the same corpus."""
    rng = np.random.default_rng(seed)
    sampler = _Sampler(grammar, rng)
    roots = grammar.roots
    labels = [label for label, _ in roots]
    weights = np.array([weight for _, weight in roots], dtype=np.float64)
    weights /= weights.sum()
    examples = []
    for _ in range(count):
        root = labels[int(rng.choice(len(labels), p=weights))]
        tree, words = sampler.intent(root, grammar.max_depth)
        examples.append(Example(" ".join(words), tree, grammar.domain))
    return examples
