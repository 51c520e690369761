"""
The strategy grid: each reference strategy trained on the full split and on
an nSPIS sample, several seeds per cell, plus the orderings a working setup
is expected to show between the cells.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Union

import numpy as np
from rich.console import Console
from rich.table import Table

from toptune.config.base import GRID_FT_EM_FLOOR, SPIS_DEFAULT
from toptune.errors import ConfigError
from toptune.harness.experiment import Experiment
from toptune.harness.search import RunRecord
from toptune.helpers.key_value import as_float, section
from toptune.tuning.strategy import PREFIX, SPECIAL_MARK, VARIANTS, TuningStrategy

FULL_SPLIT = "full"
COLUMNS = ("split", "strategy", "mean_test_em", "mean_dev_em", "runs", "diverged")

GridRunner = Callable[[str, TuningStrategy, int], RunRecord]


def spis_split(spis: int) -> str:
    return f"{spis}spis"


def grid_strategies(values: Optional[Dict[str, str]] = None) -> List[TuningStrategy]:
    """FT, FT-Top2, Prefix, †Prefix and BitFit; `prefix.*` keys shape both prefix entries."""
    prefix_values = {f"prefix.{key}": value for key, value in section(values or {}, "prefix").items()}
    prefix_values.pop("prefix.special_tokens", None)
    prefix = TuningStrategy.from_key_values({**prefix_values, "strategy": PREFIX})
    return [
        TuningStrategy.full(),
        TuningStrategy.partial(2),
        prefix,
        prefix.with_values(special_tokens=True),
        TuningStrategy.bitfit(),
    ]


@dataclass(frozen=True)
class GridCell:
    split: str
    strategy: str
    mean_test_em: float
    mean_dev_em: float
    runs: int
    diverged: int


@dataclass(frozen=True)
class GridCheck:
    description: str
    passed: bool


@dataclass
class GridResult:
    cells: List[GridCell] = field(default_factory=list)
    records: Dict[str, List[RunRecord]] = field(default_factory=dict)

    def cell(self, split: str, strategy: str) -> GridCell:
        for cell in self.cells:
            if cell.split == split and cell.strategy == strategy:
                return cell
        raise KeyError(f"no grid cell for {strategy} on {split}")

    def mean(self, split: str, strategy: str) -> float:
        return self.cell(split, strategy).mean_test_em

    def checks(self, prefix: str, low_split: str, ft_floor: float = GRID_FT_EM_FLOOR) -> List[GridCheck]:
        """
        FT reaches `ft_floor` on the full split, special tokens help prefix
        tuning there, and on the low-data split prefix tuning beats both
        FT-Top2 and BitFit.
        """
        special = f"{SPECIAL_MARK}{prefix}"
        return [
            GridCheck(f"FT test EM >= {ft_floor:.2f} on {FULL_SPLIT}", self.mean(FULL_SPLIT, "FT") >= ft_floor),
            GridCheck(f"{special} > {prefix} on {FULL_SPLIT}",
                      self.mean(FULL_SPLIT, special) > self.mean(FULL_SPLIT, prefix)),
            GridCheck(f"{prefix} > FT-Top2 on {low_split}",
                      self.mean(low_split, prefix) > self.mean(low_split, "FT-Top2")),
            GridCheck(f"{prefix} > BitFit on {low_split}",
                      self.mean(low_split, prefix) > self.mean(low_split, "BitFit")),
        ]


def _cell(split: str, strategy: str, records: Sequence[RunRecord]) -> GridCell:
    kept = [record for record in records if not record.diverged]
    test = float(np.mean([r.test_em for r in kept])) if kept else 0.0
    dev = float(np.mean([r.validation_em for r in kept])) if kept else 0.0
    return GridCell(split, strategy, test, dev, len(records), len(records) - len(kept))


def train_grid(strategies: Sequence[TuningStrategy], splits: Sequence[str], seeds: Sequence[int],
               runner: GridRunner) -> GridResult:
    """One run per (split, strategy, seed). Diverged runs count but stay out of the means."""
    result = GridResult()
    for split in splits:
        result.records[split] = []
        for strategy in strategies:
            records = [runner(split, strategy, seed) for seed in seeds]
            result.records[split].extend(records)
            result.cells.append(_cell(split, strategy.name, records))
    return result


class ExperimentGrid:
    """
    Grid runner with one Experiment per split, built on first use.
    `grid.lr.<variant>` overrides `train.lr` for that strategy variant.
    """

    def __init__(self, values: Dict[str, str], spis: int = SPIS_DEFAULT):
        self.values = {key: value for key, value in values.items() if key != "data.spis"}
        self.spis = spis
        self.lrs = {variant: as_float(lr, f"grid.lr.{variant}") for variant, lr in section(values, "grid.lr").items()}
        unknown = sorted(set(self.lrs) - set(VARIANTS))
        if unknown:
            raise ConfigError(f"unknown strategy variant in 'grid.lr.{unknown[0]}'")
        self._experiments: Dict[str, Experiment] = {}

    @property
    def splits(self) -> List[str]:
        return [FULL_SPLIT, spis_split(self.spis)]

    def experiment(self, split: str) -> Experiment:
        if split not in self._experiments:
            values = dict(self.values)
            if split != FULL_SPLIT:
                values["data.spis"] = str(self.spis)
            self._experiments[split] = Experiment(values)
        return self._experiments[split]

    def __call__(self, split: str, strategy: TuningStrategy, seed: int) -> RunRecord:
        experiment = self.experiment(split)
        config = experiment.train_config
        if strategy.variant in self.lrs:
            config = config.with_values(lr=self.lrs[strategy.variant])
        return experiment.run(strategy, config, seed)


def write_grid_tsv(result: GridResult, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["\t".join(COLUMNS)]
    for cell in result.cells:
        lines.append(f"{cell.split}\t{cell.strategy}\t{cell.mean_test_em:.6f}\t{cell.mean_dev_em:.6f}"
                     f"\t{cell.runs}\t{cell.diverged}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def print_grid(result: GridResult, checks: Sequence[GridCheck] = (), console: Optional[Console] = None) -> None:
    console = console or Console()
    table = Table(title="Strategy grid")
    for column in COLUMNS:
        table.add_column(column, justify="left" if column in ("split", "strategy") else "right")
    for cell in result.cells:
        table.add_row(cell.split, cell.strategy, f"{cell.mean_test_em:.4f}", f"{cell.mean_dev_em:.4f}",
                      str(cell.runs), str(cell.diverged))
    console.print(table)
    for check in checks:
        mark = "[green]holds[/green]" if check.passed else "[red]fails[/red]"
        console.print(f"{check.description}: {mark}")
