from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Sequence, Tuple, Union

from toptune.semantics.dataset import Example
from toptune.semantics.metric import LengthStats, length_percentiles, length_stats
from toptune.semantics.tree import label_openers
from toptune.tokenizer.tokenizer import Tokenizer

WITHOUT = "without special tokens"
WITH = "with special tokens"


@dataclass
class LengthTable:
    rows: Dict[str, LengthStats]
    percentiles: Dict[str, List[Tuple[float, float]]]
    multi_token_labels: List[str]

    @property
    def reduction(self) -> float:
        """Relative drop of the mean target length, in percent."""
        before, after = self.rows[WITHOUT].mean, self.rows[WITH].mean
        return 100.0 * (before - after) / before if before else 0.0


def length_table(examples: Sequence[Example], tokenizer: Tokenizer) -> LengthTable:
    """
    Tokenized target lengths with the base tokenizer and with every label of
    `examples` added as a special token. Labels that still take more than one
    token with specials are listed in `multi_token_labels`.
    """
    base = tokenizer.base()
    openers = sorted({opener for example in examples for opener in label_openers(example.tree)})
    special = base.with_labels(openers)
    plain = [base.encode(example.target) for example in examples]
    with_specials = [special.encode(example.target) for example in examples]
    multi = [opener for opener in openers if len(special.encode(opener[1:])) != 1]
    return LengthTable(
        rows={WITHOUT: length_stats(plain), WITH: length_stats(with_specials)},
        percentiles={WITHOUT: length_percentiles(plain), WITH: length_percentiles(with_specials)},
        multi_token_labels=multi,
    )


def write_lengths_tsv(table: LengthTable, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["variant\tmax\tmin\tmean\tmedian\tcount"]
    for variant, stats in table.rows.items():
        lines.append(f"{variant}\t{stats.max}\t{stats.min}\t{stats.mean:.2f}\t{stats.median}\t{stats.count}")
    lines.append(f"reduction\t\t\t{table.reduction:.2f}%\t\t")
    lines.append("")
    lines.append("percentile\t" + "\t".join(table.rows))
    for index, (point, _) in enumerate(table.percentiles[WITHOUT]):
        values = "\t".join(f"{table.percentiles[variant][index][1]:.1f}" for variant in table.rows)
        lines.append(f"{point:.0f}\t{values}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
