import math
from dataclasses import dataclass
from typing import Iterator, List, Sequence

import numpy as np

from toptune.errors import DataError
from toptune.semantics.dataset import Example
from toptune.tokenizer.tokenizer import Tokenizer


@dataclass(frozen=True)
class EncodedExample:
    example: Example
    source: List[int]
    target: List[int]


def encode_split(examples: Sequence[Example], tokenizer: Tokenizer, max_target_length: int) -> List[EncodedExample]:
    return [EncodedExample(example, tokenizer.encode_source(example.utterance),
                           tokenizer.encode_target(example.target, max_target_length))
            for example in examples]


def duplicate_low_data(split: Sequence, target_count: int) -> list:
    """Whole copies of `split` until it holds at least `target_count` examples."""
    if not split:
        raise DataError("cannot duplicate an empty split")
    if len(split) >= target_count:
        return list(split)
    return list(split) * math.ceil(target_count / len(split))


def micro_batches(items: Sequence, batch_size: int, rng: np.random.Generator) -> Iterator[list]:
    order = rng.permutation(len(items))
    for start in range(0, len(items), batch_size):
        yield [items[i] for i in order[start:start + batch_size]]
