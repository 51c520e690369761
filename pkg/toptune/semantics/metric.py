from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from toptune.errors import DataError, TopParseError
from toptune.semantics.tree import SemTree, decouple, parse_top


def canonical_form(tree: SemTree) -> Tuple:
    """
    Nested-tuple form of a decoupled tree with siblings sorted by
    (kind rank, label or text, canonical children). Duplicates are kept.
    """
    return _canonical(decouple(tree))


def _canonical(node: SemTree) -> Tuple:
    children = tuple(sorted(_canonical(child) for child in node.children))
    return node.kind.value, node.label, children


def unordered_em(predicted: SemTree, gold: SemTree) -> bool:
    """Unordered semantics-only exact match."""
    return canonical_form(predicted) == canonical_form(gold)


def unordered_em_text(predicted: str, gold: SemTree) -> Tuple[bool, bool]:
    """Returns (match, parse_failed). A prediction that fails to parse is a non-match."""
    try:
        tree = parse_top(predicted)
    except TopParseError:
        return False, True
    return unordered_em(tree, gold), False


@dataclass(frozen=True)
class LengthStats:
    max: int
    min: int
    mean: float
    median: int
    count: int


def _lengths(corpus: Iterable) -> List[int]:
    return [item if isinstance(item, (int, np.integer)) else len(item) for item in corpus]


def length_stats(corpus: Iterable) -> LengthStats:
    """
    Statistics of tokenized target lengths. `corpus` holds token sequences (or
    plain lengths). The median of an even-sized corpus is the lower middle.
    """
    lengths = sorted(_lengths(corpus))
    if not lengths:
        raise DataError("length_stats needs a non-empty corpus")
    return LengthStats(
        max=lengths[-1],
        min=lengths[0],
        mean=float(np.mean(lengths)),
        median=lengths[(len(lengths) - 1) // 2],
        count=len(lengths),
    )


def length_percentiles(corpus: Iterable, points: Optional[Sequence[float]] = None) -> List[Tuple[float, float]]:
    points = list(range(0, 101, 5)) if points is None else list(points)
    lengths = np.asarray(_lengths(corpus), dtype=np.float64)
    if lengths.size == 0:
        raise DataError("length_percentiles needs a non-empty corpus")
    return [(float(p), float(np.percentile(lengths, p))) for p in points]
