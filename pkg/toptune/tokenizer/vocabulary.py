from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Tuple, Union

from toptune.config.base import BOS_TOKEN, EOS_TOKEN, PAD_TOKEN, RESERVED_TOKENS, UNK_TOKEN
from toptune.errors import TokenizerError

REGION_BASE = "base"
REGION_SPECIAL = "special"
REGION_RESERVED = "reserved"


@dataclass(frozen=True)
class Vocabulary:
    """
    Dense id space: reserved tokens first, then learned subwords (together the
    base region), then special labels appended after the base region.
    """
    base: Tuple[str, ...]
    special: Tuple[str, ...] = ()
    _index: Dict[str, int] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        index = {surface: i for i, surface in enumerate(self.base)}
        if len(index) != len(self.base):
            raise TokenizerError("duplicate base entries")
        for offset, label in enumerate(self.special):
            if "[" in label:
                raise TokenizerError(f"special entry '{label}' contains '['")
            if label in index:
                raise TokenizerError(f"special entry '{label}' collides with an existing entry")
            index[label] = len(self.base) + offset
        object.__setattr__(self, "_index", index)

    def __len__(self) -> int:
        return len(self.base) + len(self.special)

    def __contains__(self, surface: str) -> bool:
        return surface in self._index

    @property
    def base_size(self) -> int:
        return len(self.base)

    @property
    def pad_id(self) -> int:
        return self._index[PAD_TOKEN]

    @property
    def bos_id(self) -> int:
        return self._index[BOS_TOKEN]

    @property
    def eos_id(self) -> int:
        return self._index[EOS_TOKEN]

    @property
    def unk_id(self) -> int:
        return self._index[UNK_TOKEN]

    def id(self, surface: str) -> int:
        return self._index.get(surface, self.unk_id)

    def surface(self, token_id: int) -> str:
        if token_id < len(self.base):
            return self.base[token_id]
        return self.special[token_id - len(self.base)]

    def is_special(self, token_id: int) -> bool:
        return token_id >= len(self.base)

    def is_special_label(self, surface: str) -> bool:
        index = self._index.get(surface)
        return index is not None and index >= len(self.base)

    def region(self, token_id: int) -> str:
        if token_id >= len(self.base):
            return REGION_SPECIAL
        if self.base[token_id] in RESERVED_TOKENS:
            return REGION_RESERVED
        return REGION_BASE

    def special_ids(self) -> List[int]:
        return list(range(len(self.base), len(self)))

    def without_specials(self) -> "Vocabulary":
        return Vocabulary(self.base)


def add_special_labels(vocab: Vocabulary, labels: Iterable[str]) -> Vocabulary:
    """
    Appends non-terminal labels after the base region. Raw forms such as
    `[IN:GET_EVENT` are stored bracket-stripped; duplicates keep their first id.
    """
    special = list(vocab.special)
    seen = set(special)
    for raw in labels:
        label = raw[1:] if raw.startswith("[") else raw
        if not label:
            raise TokenizerError(f"empty label '{raw}'")
        if label in seen:
            continue
        if label in vocab.base:
            raise TokenizerError(f"label '{label}' collides with base entry")
        seen.add(label)
        special.append(label)
    return Vocabulary(vocab.base, tuple(special))


def save_vocabulary(vocab: Vocabulary, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        for token_id in range(len(vocab)):
            f.write(f"{token_id}\t{vocab.surface(token_id)}\t{vocab.region(token_id)}\n")
    return path


def load_vocabulary(path: Union[str, Path]) -> Vocabulary:
    base, special = [], []
    with open(path, "r", encoding="utf-8") as f:
        for number, line in enumerate(f):
            if not line.strip():
                continue
            token_id, surface, region = line.rstrip("\n").split("\t")
            if int(token_id) != number:
                raise TokenizerError(f"{path}: ids must be dense, found {token_id} at line {number + 1}")
            (special if region == REGION_SPECIAL else base).append(surface)
    return Vocabulary(tuple(base), tuple(special))
