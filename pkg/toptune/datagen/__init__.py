from .grammar import (Grammar, IntentRule, SlotRule, Template, default_grammar, depth_distribution, expected_depth,
                      grammar_from_dict, load_grammar)
from .generate import generate
from .sampling import SpisSample, SpisSpec, label_counts, spis_sample, split_corpus
