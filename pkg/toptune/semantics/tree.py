import re
from dataclasses import dataclass
from enum import Enum
from typing import Iterator, List, Tuple

from toptune.config.base import INTENT_PREFIX, LABEL_PATTERN, SLOT_PREFIX
from toptune.errors import TopParseError

_LABEL_RE = re.compile(LABEL_PATTERN)
_TOKEN_RE = re.compile(r"\[[^\s\[\]]*|\]|[^\s\[\]]+")


class NodeKind(Enum):
    INTENT = 0
    SLOT = 1
    TERMINAL = 2


@dataclass(frozen=True)
class SemTree:
    kind: NodeKind
    label: str
    children: Tuple["SemTree", ...] = ()

    @staticmethod
    def intent(label: str, *children: "SemTree") -> "SemTree":
        return SemTree(NodeKind.INTENT, label, tuple(children))

    @staticmethod
    def slot(label: str, *children: "SemTree") -> "SemTree":
        return SemTree(NodeKind.SLOT, label, tuple(children))

    @staticmethod
    def terminal(text: str) -> "SemTree":
        return SemTree(NodeKind.TERMINAL, text)

    @property
    def is_terminal(self) -> bool:
        return self.kind is NodeKind.TERMINAL

    def __str__(self) -> str:
        return serialize(self)


def _check_label(label: str, kind: NodeKind) -> None:
    expected = INTENT_PREFIX if kind is NodeKind.INTENT else SLOT_PREFIX
    if not label.startswith(expected) or len(label) == len(expected):
        raise TopParseError(f"empty or misplaced label '{label}'")
    if not _LABEL_RE.match(label):
        raise TopParseError(f"malformed label '{label}'")


def parse_top(text: str) -> SemTree:
    """
    Parses a bracketed TOP string such as `[IN:A words [SL:B x ] ]`. Adjacent
    words become one Terminal node holding them space-joined.
    """
    tokens = _TOKEN_RE.findall(text)
    if not tokens:
        raise TopParseError("empty input")
    if not tokens[0].startswith("["):
        raise TopParseError(f"expected an intent opener, got '{tokens[0]}'")

    stack: List[Tuple[NodeKind, str, list]] = []
    words: List[str] = []
    root = None

    def flush_words():
        if words:
            stack[-1][2].append(SemTree.terminal(" ".join(words)))
            words.clear()

    for position, token in enumerate(tokens):
        if root is not None:
            raise TopParseError(f"unexpected content after the root node: '{token}'")
        if token.startswith("["):
            label = token[1:]
            if label.startswith(INTENT_PREFIX):
                kind = NodeKind.INTENT
            elif label.startswith(SLOT_PREFIX):
                kind = NodeKind.SLOT
            else:
                raise TopParseError(f"unknown node opener '{token}'")
            _check_label(label, kind)
            if not stack and kind is not NodeKind.INTENT:
                raise TopParseError("root node must be an intent")
            if stack:
                flush_words()
            stack.append((kind, label, []))
        elif token == "]":
            if not stack:
                raise TopParseError(f"unbalanced ']' at token {position}")
            flush_words()
            kind, label, children = stack.pop()
            node = SemTree(kind, label, tuple(children))
            if stack:
                stack[-1][2].append(node)
            else:
                root = node
        else:
            if not stack:
                raise TopParseError(f"text outside of any node: '{token}'")
            words.append(token)

    if stack:
        raise TopParseError(f"unbalanced brackets: {len(stack)} node(s) left open")
    return root


def serialize(tree: SemTree) -> str:
    if tree.is_terminal:
        return tree.label
    parts = [f"[{tree.label}"]
    parts.extend(serialize(child) for child in tree.children)
    parts.append("]")
    return " ".join(parts)


def decouple(tree: SemTree) -> SemTree:
    """Drops every Terminal whose parent is an Intent node (TOP -> TOP-Decoupled)."""
    if tree.is_terminal:
        return tree
    children = []
    for child in tree.children:
        if child.is_terminal and tree.kind is NodeKind.INTENT:
            continue
        children.append(decouple(child))
    return SemTree(tree.kind, tree.label, tuple(children))


def tree_depth(tree: SemTree) -> int:
    """Number of intent/slot nodes on the longest root-to-leaf path."""
    if tree.is_terminal:
        return 0
    return 1 + max((tree_depth(child) for child in tree.children), default=0)


def iter_nodes(tree: SemTree) -> Iterator[SemTree]:
    yield tree
    for child in tree.children:
        yield from iter_nodes(child)


def labels(tree: SemTree) -> List[str]:
    """Intent and slot labels in pre-order, duplicates kept."""
    return [node.label for node in iter_nodes(tree) if not node.is_terminal]


def terminal_words(tree: SemTree) -> List[str]:
    words = []
    for node in iter_nodes(tree):
        if node.is_terminal:
            words.extend(node.label.split())
    return words


def label_openers(tree: SemTree) -> List[str]:
    """Raw label tokens as they appear in bracketed text, e.g. `[IN:GET_EVENT`."""
    return [f"[{label}" for label in labels(tree)]
