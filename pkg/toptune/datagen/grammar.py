import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
import yaml

from toptune.config.base import DEFAULT_GRAMMAR_FILE, LABEL_PATTERN
from toptune.errors import GrammarError

_LABEL_RE = re.compile(LABEL_PATTERN)
_SLOT_REF_RE = re.compile(r"^\{(SL:[A-Z0-9_]+)\}$")


@dataclass(frozen=True)
class Template:
    """Carrier words (str) and slot references (`("slot", label)`) in utterance order."""
    parts: Tuple[Union[str, Tuple[str, str]], ...]
    weight: float = 1.0

    @property
    def slots(self) -> List[str]:
        return [part[1] for part in self.parts if isinstance(part, tuple)]


@dataclass(frozen=True)
class IntentRule:
    label: str
    templates: Tuple[Template, ...]
    root_weight: float = 0.0


@dataclass(frozen=True)
class SlotRule:
    label: str
    words: Tuple[str, ...] = ()
    words_weight: float = 1.0
    nested: Tuple[Tuple[str, float], ...] = ()


@dataclass
class Grammar:
    name: str
    intents: Dict[str, IntentRule]
    slots: Dict[str, SlotRule]
    max_depth: int = 4
    domain: Optional[str] = None
    _min_depth: Dict[str, float] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._check()

    @property
    def roots(self) -> List[Tuple[str, float]]:
        return [(label, rule.root_weight) for label, rule in self.intents.items() if rule.root_weight > 0]

    def min_depth(self, label: str) -> float:
        return self._min_depth[label]

    def _check(self) -> None:
        if self.max_depth < 1:
            raise GrammarError(f"max_depth must be >= 1, got {self.max_depth}")
        for label in list(self.intents) + list(self.slots):
            if not _LABEL_RE.match(label):
                raise GrammarError(f"malformed label '{label}'")
        for rule in self.intents.values():
            if not rule.templates:
                raise GrammarError(f"intent '{rule.label}' has no templates")
            for template in rule.templates:
                if template.weight <= 0:
                    raise GrammarError(f"intent '{rule.label}' has a template with non-positive weight")
                for slot in template.slots:
                    if slot not in self.slots:
                        raise GrammarError(f"intent '{rule.label}' refers to undefined slot '{slot}'")
        for rule in self.slots.values():
            if not rule.words and not rule.nested:
                raise GrammarError(f"slot '{rule.label}' has neither words nor nested intents")
            for intent, weight in rule.nested:
                if intent not in self.intents:
                    raise GrammarError(f"slot '{rule.label}' refers to undefined intent '{intent}'")
                if weight <= 0:
                    raise GrammarError(f"slot '{rule.label}' has non-positive weight for '{intent}'")
        if not self.roots:
            raise GrammarError("grammar has no root intents (weight > 0)")
        self._compute_min_depth()
        self._check_reachable()
        for label, _ in self.roots:
            if self._min_depth[label] > self.max_depth:
                raise GrammarError(f"root intent '{label}' cannot be realized within depth {self.max_depth}")

    def _compute_min_depth(self) -> None:
        depth = {label: float("inf") for label in list(self.intents) + list(self.slots)}
        changed = True
        while changed:
            changed = False
            for label, rule in self.slots.items():
                options = [1.0] if rule.words else []
                options += [1.0 + depth[intent] for intent, _ in rule.nested]
                best = min(options)
                if best < depth[label]:
                    depth[label], changed = best, True
            for label, rule in self.intents.items():
                best = min(1.0 + max([depth[s] for s in t.slots], default=0.0) for t in rule.templates)
                if best < depth[label]:
                    depth[label], changed = best, True
        self._min_depth = depth

    def _check_reachable(self) -> None:
        seen = set()
        stack = [label for label, _ in self.roots]
        while stack:
            label = stack.pop()
            if label in seen:
                continue
            seen.add(label)
            if label in self.intents:
                stack.extend(slot for t in self.intents[label].templates for slot in t.slots)
            else:
                stack.extend(intent for intent, _ in self.slots[label].nested)
        unreachable = sorted(set(self.intents) - seen)
        if unreachable:
            raise GrammarError(f"unreachable intents: {', '.join(unreachable)}")

    def intent_options(self, label: str, budget: int) -> Tuple[List[Template], np.ndarray]:
        """Templates of `label` that fit in `budget` levels, with normalized weights."""
        templates = [t for t in self.intents[label].templates
                     if 1.0 + max([self._min_depth[s] for s in t.slots], default=0.0) <= budget]
        weights = np.array([t.weight for t in templates], dtype=np.float64)
        return templates, weights / weights.sum()

    def slot_options(self, label: str, budget: int) -> Tuple[List[Optional[str]], np.ndarray]:
        """None stands for "pick a lexicon word"; other options are nested intents."""
        rule = self.slots[label]
        options: List[Optional[str]] = []
        weights = []
        if rule.words:
            options.append(None)
            weights.append(rule.words_weight)
        for intent, weight in rule.nested:
            if 1.0 + self._min_depth[intent] <= budget:
                options.append(intent)
                weights.append(weight)
        weights = np.array(weights, dtype=np.float64)
        return options, weights / weights.sum()


def _parse_template(raw, intent: str) -> Template:
    if isinstance(raw, str):
        raw = {"pattern": raw}
    if "pattern" not in raw:
        raise GrammarError(f"intent '{intent}' has a template without a pattern")
    parts = []
    for token in str(raw["pattern"]).split():
        match = _SLOT_REF_RE.match(token)
        if match:
            parts.append(("slot", match.group(1)))
        elif "{" in token or "}" in token or "[" in token or "]" in token:
            raise GrammarError(f"intent '{intent}': bad pattern token '{token}'")
        else:
            parts.append(token)
    return Template(tuple(parts), float(raw.get("weight", 1.0)))


def grammar_from_dict(data: dict) -> Grammar:
    if not isinstance(data, dict) or "intents" not in data or "slots" not in data:
        raise GrammarError("grammar needs 'intents' and 'slots' sections")
    intents = {}
    for label, body in (data["intents"] or {}).items():
        body = body or {}
        templates = tuple(_parse_template(raw, label) for raw in body.get("templates", []))
        intents[label] = IntentRule(label, templates, float(body.get("weight", 0.0)))
    slots = {}
    for label, body in (data["slots"] or {}).items():
        body = body or {}
        words = tuple(str(word) for word in body.get("words", []))
        nested = tuple((intent, float(weight)) for intent, weight in (body.get("nested") or {}).items())
        slots[label] = SlotRule(label, words, float(body.get("words_weight", 1.0)), nested)
    return Grammar(str(data.get("name", "grammar")), intents, slots, int(data.get("max_depth", 4)),
                   data.get("domain"))


def load_grammar(path: Union[str, Path]) -> Grammar:
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as e:
        raise GrammarError(f"{path}: invalid YAML: {e}") from None
    return grammar_from_dict(data)


def default_grammar() -> Grammar:
    """The bundled mini food-ordering domain."""
    text = resources.files("toptune.datagen").joinpath("grammars", DEFAULT_GRAMMAR_FILE).read_text(encoding="utf-8")
    return grammar_from_dict(yaml.safe_load(text))


def depth_distribution(grammar: Grammar, label: str, budget: Optional[int] = None) -> np.ndarray:
    """P(tree_depth = d) for d = 0..max_depth of a subtree rooted at `label`."""
    size = grammar.max_depth + 1

    @lru_cache(maxsize=None)
    def slot(name: str, remaining: int) -> Tuple[float, ...]:
        dist = np.zeros(size)
        options, weights = grammar.slot_options(name, remaining)
        for option, weight in zip(options, weights):
            if option is None:
                dist[1] += weight
            else:
                dist += weight * _shift(np.array(intent(option, remaining - 1)))
        return tuple(dist)

    @lru_cache(maxsize=None)
    def intent(name: str, remaining: int) -> Tuple[float, ...]:
        dist = np.zeros(size)
        templates, weights = grammar.intent_options(name, remaining)
        for template, weight in zip(templates, weights):
            cdf = np.ones(size)
            for child in template.slots:
                cdf *= np.cumsum(slot(child, remaining - 1))
            dist += weight * _shift(np.diff(cdf, prepend=0.0))
        return tuple(dist)

    budget = grammar.max_depth if budget is None else budget
    if label in grammar.intents:
        return np.array(intent(label, budget))
    return np.array(slot(label, budget))


def _shift(dist: np.ndarray) -> np.ndarray:
    """Adds one level: P(depth = d) becomes P(depth = d + 1)."""
    shifted = np.zeros_like(dist)
    shifted[1:] = dist[:-1]
    return shifted


def expected_depth(grammar: Grammar) -> float:
    """Analytic mean tree depth of `generate` output, weighting roots by their weights."""
    roots = grammar.roots
    total = sum(weight for _, weight in roots)
    depths = np.arange(grammar.max_depth + 1)
    return float(sum(weight / total * (depth_distribution(grammar, label) @ depths) for label, weight in roots))
