from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Optional, Union

from toptune.errors import TopParseError
from toptune.helpers.logs import Log
from toptune.semantics.tree import SemTree, decouple, parse_top, serialize, terminal_words


@dataclass(frozen=True)
class Example:
    utterance: str
    tree: SemTree
    domain: Optional[str] = None

    @property
    def target(self) -> str:
        return serialize(self.tree)

    def decoupled(self) -> "Example":
        return Example(self.utterance, decouple(self.tree), self.domain)


def check_terminal_alignment(example: Example) -> bool:
    """True when the tree's terminal words, in order, are a subsequence of the utterance tokens."""
    utterance = iter(example.utterance.split())
    return all(word in utterance for word in terminal_words(example.tree))


def load_tsv(path: Union[str, Path], strict: bool = False) -> List[Example]:
    """
    Reads `domain<TAB>utterance<TAB>top_target` lines. With `strict`, TOP-format
    terminal alignment is checked as well.
    """
    path = Path(path)
    examples = []
    with open(path, "r", encoding="utf-8") as f:
        for number, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            fields = line.split("\t")
            if len(fields) != 3:
                raise TopParseError(f"{path}:{number}: expected 3 tab-separated fields, got {len(fields)}")
            domain, utterance, target = fields
            try:
                tree = parse_top(target)
            except TopParseError as e:
                raise TopParseError(f"{path}:{number}: {e}") from None
            example = Example(utterance, tree, domain or None)
            if strict and not check_terminal_alignment(example):
                raise TopParseError(f"{path}:{number}: terminals are not a subsequence of the utterance")
            examples.append(example)
    return examples


def save_tsv(examples: Iterable[Example], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        for example in examples:
            f.write(f"{example.domain or ''}\t{example.utterance}\t{example.target}\n")
    return path


def convert_file(source: Union[str, Path], destination: Union[str, Path]) -> int:
    """Writes the TOP-Decoupled variant of a TSV dataset; returns the example count."""
    examples = [example.decoupled() for example in load_tsv(source)]
    save_tsv(examples, destination)
    Log.converted(f"{source} -> {destination}")
    return len(examples)
