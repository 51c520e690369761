from pathlib import Path
from typing import List, Optional, Sequence, Union

from rich.console import Console
from rich.table import Table

from toptune.config.base import BART_LARGE_TOTAL_PARAMETERS, REMINDER_LABEL_COUNT
from toptune.model.config import ModelConfig
from toptune.tuning.budget import BudgetReport, budget_report
from toptune.tuning.strategy import TuningStrategy

COLUMNS = ("strategy", "formula", "materialized", "trainable", "total", "percent")


def reference_strategies() -> List[TuningStrategy]:
    return [
        TuningStrategy.full(),
        TuningStrategy.partial(2),
        TuningStrategy.prefix(30),
        TuningStrategy.prefix(30, special_tokens=True),
        TuningStrategy.prefix(5),
        TuningStrategy.prefix(5, special_tokens=True),
        TuningStrategy.bitfit(),
    ]


def budget_table(strategies: Optional[Sequence[TuningStrategy]] = None, config: Optional[ModelConfig] = None,
                 label_count: int = REMINDER_LABEL_COUNT, total: Optional[int] = None) -> List[BudgetReport]:
    """
    One BudgetReport per strategy. Without a config the reference PLM's
    dimensions and published total are used.
    """
    strategies = reference_strategies() if strategies is None else strategies
    if config is None:
        config = ModelConfig.bart_large()
        total = BART_LARGE_TOTAL_PARAMETERS if total is None else total
    return [budget_report(strategy, config, label_count, total) for strategy in strategies]


def _row(report: BudgetReport) -> List[str]:
    formula = "-" if report.formula_count is None else f"{report.formula_count}"
    return [report.strategy, formula, f"{report.materialized_count}", f"{report.trainable_count}",
            f"{report.total_count}", f"{report.percent}%"]


def write_budget_tsv(reports: Sequence[BudgetReport], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["\t".join(COLUMNS)] + ["\t".join(_row(report)) for report in reports]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def print_budget_table(reports: Sequence[BudgetReport], console: Optional[Console] = None) -> None:
    console = console or Console()
    table = Table(title="Task-specific parameters")
    for column in COLUMNS:
        table.add_column(column, justify="left" if column == "strategy" else "right")
    for report in reports:
        table.add_row(*[f"{int(cell):,}" if cell.isdigit() else cell for cell in _row(report)])
    console.print(table)
    for report in reports:
        for note in report.notes:
            console.print(f"[grey50]{report.strategy}: {note}[/grey50]")
        if report.bitfit_inventory:
            console.print(f"[grey50]{report.strategy} biases: {', '.join(report.bitfit_inventory)}[/grey50]")
