from .tree import NodeKind, SemTree, decouple, labels, parse_top, serialize, tree_depth
from .metric import LengthStats, canonical_form, length_percentiles, length_stats, unordered_em, unordered_em_text
from .dataset import Example, check_terminal_alignment, convert_file, load_tsv, save_tsv
