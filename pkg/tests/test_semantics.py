import itertools

import pytest

from toptune.errors import DataError, TopParseError
from toptune.semantics.dataset import Example, check_terminal_alignment, convert_file, load_tsv, save_tsv
from toptune.semantics.metric import canonical_form, length_percentiles, length_stats, unordered_em, unordered_em_text
from toptune.semantics.tree import NodeKind, SemTree, decouple, labels, parse_top, serialize, tree_depth

EVENT = "[IN:GET_EVENT what is happening [SL:LOCATION in town ] [SL:DATE_TIME this weekend ] ]"


def test_parse_and_serialize():
    tree = parse_top(EVENT)
    assert tree.kind is NodeKind.INTENT
    assert tree.label == "IN:GET_EVENT"
    assert [child.label for child in tree.children] == ["what is happening", "SL:LOCATION", "SL:DATE_TIME"]
    assert serialize(tree) == EVENT


def test_parse_normalizes_whitespace():
    assert serialize(parse_top("  [IN:A   hello\t[SL:B  x ]]  ")) == "[IN:A hello [SL:B x ] ]"


@pytest.mark.parametrize("text", [
    "",
    "hello",
    "[IN:A x",
    "[IN:A x ] ]",
    "[XX:A x ]",
    "[SL:A x ]",
    "[IN: x ]",
    "[IN:lower x ]",
    "[IN:A x ] [IN:B y ]",
])
def test_malformed_input_is_rejected(text):
    with pytest.raises(TopParseError):
        parse_top(text)


def test_parse_error_is_a_value_error():
    with pytest.raises(ValueError):
        parse_top("[IN:A")


def test_decouple_drops_intent_terminals_only():
    tree = parse_top("[IN:A hello [SL:B x y [IN:C go [SL:D z ] ] ] there ]")
    assert serialize(decouple(tree)) == "[IN:A [SL:B x y [IN:C [SL:D z ] ] ] ]"


def test_labels_keep_duplicates_in_preorder():
    tree = parse_top("[IN:A [SL:B x ] [SL:B y ] [SL:C [IN:D z ] ] ]")
    assert labels(tree) == ["IN:A", "SL:B", "SL:B", "SL:C", "IN:D"]


@pytest.mark.parametrize("text, depth", [
    ("[IN:A hi ]", 1),
    ("[IN:A [SL:B w ] ]", 2),
    ("[IN:A [SL:B w ] [SL:C [IN:D [SL:E x ] ] ] ]", 4),
])
def test_tree_depth(text, depth):
    assert tree_depth(parse_top(text)) == depth


def test_unordered_em_holds_under_every_sibling_permutation():
    slots = ["[SL:X a ]", "[SL:Y b c ]", "[SL:Z [IN:N [SL:W d ] [SL:V e ] ] ]"]
    gold = parse_top(f"[IN:A {' '.join(slots)} ]")
    for order in itertools.permutations(slots):
        assert unordered_em(parse_top(f"[IN:A noise {' '.join(order)} ]"), gold)
    for inner in ("[SL:V e ] [SL:W d ]", "[SL:W d ] [SL:V e ]"):
        assert unordered_em(parse_top(f"[IN:A [SL:Z [IN:N {inner} ] ] [SL:Y b c ] [SL:X a ] ]"), gold)



def _trees(depth, width, level=0):
    """Every tree of at most `depth` levels and `width` children per node, intents and slots alternating."""
    kind, prefix = (NodeKind.INTENT, "IN") if level % 2 == 0 else (NodeKind.SLOT, "SL")
    below = _trees(depth - 1, width, level + 1) if depth > 1 else []
    out = []
    for label in ("A", "B", "C"):
        for count in range(width + 1 if below else 1):
            for children in itertools.product(below, repeat=count):
                out.append(SemTree(kind, f"{prefix}:{label}", children))
    return out


def _orderings(tree):
    """Every tree reachable by reordering siblings at any node."""
    variants = [_orderings(child) for child in tree.children]
    found = set()
    for order in itertools.permutations(range(len(tree.children))):
        for children in itertools.product(*(variants[i] for i in order)):
            found.add(SemTree(tree.kind, tree.label, children))
    return frozenset(found)


def test_unordered_em_matches_brute_force_on_every_wide_pair():
    trees = _trees(depth=2, width=4)
    assert len(trees) == 363
    for gold in trees:
        same = _orderings(gold)
        for predicted in trees:
            assert unordered_em(predicted, gold) == (predicted in same)


def test_unordered_em_matches_brute_force_on_every_deep_tree():
    trees = _trees(depth=3, width=2)
    assert len(trees) == 4683
    by_metric, by_orderings = {}, {}
    for index, tree in enumerate(trees):
        by_metric.setdefault(canonical_form(tree), set()).add(index)
        by_orderings.setdefault(_orderings(tree), set()).add(index)
        assert all(unordered_em(variant, tree) for variant in _orderings(tree))
    assert sorted(map(sorted, by_metric.values())) == sorted(map(sorted, by_orderings.values()))


@pytest.mark.parametrize("predicted", [
    "[IN:B [SL:X a ] ]",
    "[IN:A [SL:X b ] ]",
    "[IN:A [SL:X a ] [SL:X a ] ]",
    "[IN:A [SL:Y a ] ]",
    "[IN:A [SL:X [IN:C a ] ] ]",
])
def test_unordered_em_rejects_semantic_differences(predicted):
    assert not unordered_em(parse_top(predicted), parse_top("[IN:A [SL:X a ] ]"))


def test_unparsable_prediction_is_a_miss():
    gold = parse_top("[IN:A [SL:X a ] ]")
    assert unordered_em_text("[IN:A [SL:X a ]", gold) == (False, True)
    assert unordered_em_text("", gold) == (False, True)
    assert unordered_em_text("[IN:A [SL:X a ] ]", gold) == (True, False)


def test_length_stats_takes_lower_median():
    stats = length_stats([[1], [1, 2, 3, 4], [1, 2], [1, 2, 3]])
    assert (stats.max, stats.min, stats.mean, stats.median, stats.count) == (4, 1, 2.5, 2, 4)


def test_length_stats_needs_data():
    with pytest.raises(DataError):
        length_stats([])


def test_length_percentiles():
    points = length_percentiles([1, 2, 3, 4, 5], points=[0, 50, 100])
    assert points == [(0.0, 1.0), (50.0, 3.0), (100.0, 5.0)]


def test_terminal_alignment():
    aligned = Example("play the song hello please", parse_top("[IN:PLAY [SL:SONG hello ] please ]"))
    shuffled = Example("please play hello", parse_top("[IN:PLAY please [SL:SONG hello ] play ]"))
    assert check_terminal_alignment(aligned)
    assert not check_terminal_alignment(shuffled)


def test_tsv_round_trip(tmp_path):
    examples = [
        Example("order pizza", parse_top("[IN:ORDER order [SL:DISH pizza ] ]"), "food"),
        Example("cancel it", parse_top("[IN:CANCEL cancel it ]")),
    ]
    path = save_tsv(examples, tmp_path / "split.tsv")
    assert load_tsv(path, strict=True) == examples


def test_tsv_errors_name_the_line(tmp_path):
    path = tmp_path / "bad.tsv"
    path.write_text("food\torder pizza\t[IN:ORDER [SL:DISH pizza ] ]\nfood\tbroken\t[IN:ORDER\n", encoding="utf-8")
    with pytest.raises(TopParseError, match=":2:"):
        load_tsv(path)


def test_strict_load_checks_alignment(tmp_path):
    path = tmp_path / "unaligned.tsv"
    path.write_text("food\torder pizza\t[IN:ORDER [SL:DISH pasta ] ]\n", encoding="utf-8")
    assert len(load_tsv(path)) == 1
    with pytest.raises(TopParseError):
        load_tsv(path, strict=True)


def test_convert_file_writes_decoupled_targets(tmp_path):
    source = save_tsv([Example("order pizza now", parse_top("[IN:ORDER order [SL:DISH pizza ] now ]"), "food")],
                      tmp_path / "top.tsv")
    count = convert_file(source, tmp_path / "decoupled.tsv")
    assert count == 1
    (example,) = load_tsv(tmp_path / "decoupled.tsv")
    assert example.target == "[IN:ORDER [SL:DISH pizza ] ]"
    assert example.utterance == "order pizza now"


def test_semtree_constructors():
    tree = SemTree.intent("IN:A", SemTree.slot("SL:B", SemTree.terminal("x")))
    assert str(tree) == "[IN:A [SL:B x ] ]"
