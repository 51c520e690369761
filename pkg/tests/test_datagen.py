import numpy as np
import pytest
import yaml

from toptune.datagen.generate import generate
from toptune.datagen.grammar import default_grammar, depth_distribution, expected_depth, grammar_from_dict, load_grammar
from toptune.datagen.sampling import SpisSpec, label_counts, spis_sample, split_corpus
from toptune.errors import ContractError, GrammarError
from toptune.semantics.dataset import Example, check_terminal_alignment
from toptune.semantics.tree import parse_top, serialize, tree_depth


def test_slotless_grammar_gives_depth_one_trees():
    grammar = grammar_from_dict({
        "intents": {"IN:GREET": {"weight": 1, "templates": ["hello there"]}},
        "slots": {},
    })
    for example in generate(grammar, 5, seed=1):
        assert tree_depth(example.tree) == 1
        assert example.target == "[IN:GREET hello there ]"
        assert example.utterance == "hello there"


def test_generation_is_seeded(small_grammar):
    assert generate(small_grammar, 30, seed=4) == generate(small_grammar, 30, seed=4)
    assert generate(small_grammar, 30, seed=4) != generate(small_grammar, 30, seed=5)


def test_generated_examples_parse_back_and_align():
    grammar = default_grammar()
    for example in generate(grammar, 300, seed=0):
        assert parse_top(serialize(example.tree)) == example.tree
        assert check_terminal_alignment(example)
        assert tree_depth(example.tree) <= grammar.max_depth
        assert example.domain == grammar.domain


def test_depth_distribution(small_grammar):
    order = depth_distribution(small_grammar, "IN:ORDER")
    assert np.allclose(order, [0.0, 0.0, 2 / 3, 0.0, 1 / 3])
    assert np.allclose(depth_distribution(small_grammar, "SL:PLACE", budget=3), [0.0, 0.5, 0.0, 0.5, 0.0])
    assert depth_distribution(small_grammar, "IN:CANCEL")[1] == pytest.approx(1.0)


def test_expected_depth_is_exact(small_grammar):
    assert expected_depth(small_grammar) == pytest.approx(19 / 9)


def test_expected_depth_matches_sampling():
    grammar = default_grammar()
    distribution_sum = sum(depth_distribution(grammar, label).sum() for label, _ in grammar.roots)
    assert distribution_sum == pytest.approx(len(grammar.roots))
    sampled = np.mean([tree_depth(example.tree) for example in generate(grammar, 10000, seed=0)])
    assert abs(sampled - expected_depth(grammar)) < 0.1


def test_nested_slots_respect_the_depth_limit(small_grammar_data):
    small_grammar_data["max_depth"] = 3
    grammar = grammar_from_dict(small_grammar_data)
    depths = {tree_depth(example.tree) for example in generate(grammar, 200, seed=0)}
    assert depths == {1, 2}


@pytest.mark.parametrize("change, message", [
    (lambda g: g["intents"].update({"IN:ORPHAN": {"templates": ["never used"]}}), "unreachable"),
    (lambda g: g["intents"]["IN:CANCEL"].update({"templates": ["cancel {SL:NOPE}"]}), "undefined slot"),
    (lambda g: g.update({"max_depth": 1}), "depth"),
    (lambda g: [body.pop("weight", None) for body in g["intents"].values()], "root"),
    (lambda g: g["slots"].update({"SL:lower": {"words": ["x"]}}), "malformed"),
    (lambda g: g["slots"]["SL:PLACE"].update({"nested": {"IN:MISSING": 1}}), "undefined intent"),
    (lambda g: g["slots"].update({"SL:EMPTY": {}}), "neither"),
])
def test_grammar_errors(small_grammar_data, change, message):
    change(small_grammar_data)
    with pytest.raises(GrammarError, match=message):
        grammar_from_dict(small_grammar_data)


def test_load_grammar_from_yaml(tmp_path, small_grammar, small_grammar_data):
    path = tmp_path / "small.yaml"
    path.write_text(yaml.safe_dump(small_grammar_data), encoding="utf-8")
    assert generate(load_grammar(path), 20, seed=2) == generate(small_grammar, 20, seed=2)
    path.write_text("intents: [unclosed", encoding="utf-8")
    with pytest.raises(GrammarError):
        load_grammar(path)


def _manual(*targets):
    return [Example(f"utterance {i}", parse_top(target)) for i, target in enumerate(targets)]


def test_one_spis_takes_one_example_per_label():
    corpus = _manual("[IN:A [SL:X a ] ]", "[IN:A [SL:X b ] ]", "[IN:B c ]", "[IN:C [SL:Y d ] ]")
    sample = spis_sample(corpus, SpisSpec(spis=1))
    assert len(sample.examples) == 3
    assert sample.counts == {"IN:A": 1, "IN:B": 1, "IN:C": 1, "SL:X": 1, "SL:Y": 1}
    assert not sample.shortfalls


def test_ten_spis_on_the_default_grammar():
    corpus = generate(default_grammar(), 2000, seed=0)
    available = label_counts(corpus)
    sample = spis_sample(corpus, SpisSpec(spis=10, seed=3))
    assert len(sample.examples) < len(corpus)
    assert sample.counts == dict(sorted(label_counts(sample.examples).items()))
    for label, count in available.items():
        assert sample.counts[label] >= min(10, count)
    assert spis_sample(corpus, SpisSpec(spis=10, seed=3)).examples == sample.examples


def test_rare_labels_are_reported(capsys, small_grammar):
    corpus = generate(small_grammar, 20, seed=0)
    sample = spis_sample(corpus, SpisSpec(spis=100))
    assert set(sample.shortfalls) == set(label_counts(corpus))
    assert len(sample.examples) == len(corpus)
    assert "fewer than 100" in capsys.readouterr().out


def test_sampling_needs_a_corpus():
    with pytest.raises(ContractError):
        spis_sample([])


def test_split_corpus(corpus):
    train, dev, test = split_corpus(corpus, (30, 10, 10), seed=0)
    assert (len(train), len(dev), len(test)) == (30, 10, 10)
    ids = [id(example) for example in train + dev + test]
    assert len(set(ids)) == 50
    assert split_corpus(corpus, (30, 10, 10), seed=0)[0] == train
    with pytest.raises(ContractError):
        split_corpus(corpus, (50, 10, 10))
