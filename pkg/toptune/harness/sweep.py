from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Sequence, Tuple, Union

import numpy as np

from toptune.errors import ConfigError
from toptune.harness.rendering import render_to
from toptune.harness.search import RunRecord
from toptune.tuning.strategy import SPECIAL_MARK

PLAIN = "Prefix"
SPECIAL = f"{SPECIAL_MARK}Prefix"
COLUMNS = ("variant", "length", "mean_em", "variance", "stddev", "runs")
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")

# Strategy fields each location/scope variant sets
PREFIX_VARIANTS = {
    "prefix": {"location": "prefix", "layer_scope": "all"},
    "suffix": {"location": "suffix", "layer_scope": "all"},
    "prefix_and_suffix": {"location": "prefix_and_suffix", "layer_scope": "all"},
    "top2_decoder": {"location": "prefix", "layer_scope": "top2_decoder"},
}

SweepRunner = Callable[[int, bool, int], RunRecord]
VariantRunner = Callable[[str, int, int], RunRecord]


@dataclass(frozen=True)
class SweepRow:
    variant: str
    length: int
    mean_em: float
    variance: float
    stddev: float
    runs: int


@dataclass
class SweepResult:
    rows: List[SweepRow] = field(default_factory=list)
    records: List[RunRecord] = field(default_factory=list)

    def series(self, variant: str) -> List[Tuple[int, float, float]]:
        """Ordered (length, mean, stddev) points of one variant."""
        return [(row.length, row.mean_em, row.stddev) for row in self.rows if row.variant == variant]


def summarize(records_by_point: Dict[Tuple[str, int], List[RunRecord]],
              order: Sequence[str] = (PLAIN, SPECIAL)) -> List[SweepRow]:
    """Rows grouped by variant in `order` (unknown variants last), then by length."""
    rank = {variant: index for index, variant in enumerate(order)}
    rows = []
    for (variant, length), records in sorted(records_by_point.items(),
                                             key=lambda item: (rank.get(item[0][0], len(rank)), item[0][1])):
        ems = np.array([r.test_em for r in records], dtype=np.float64)
        rows.append(SweepRow(variant, length, float(ems.mean()), float(ems.var()), float(ems.std()), len(ems)))
    return rows


def sweep_prefix_length(lengths: Sequence[int], seeds: Sequence[int], runner: SweepRunner,
                        variants: Sequence[bool] = (False, True)) -> SweepResult:
    """
    One run per (length, variant, seed); rows hold the mean and population
    variance of test EM per (variant, length).
    """
    points: Dict[Tuple[str, int], List[RunRecord]] = {}
    records = []
    for special in variants:
        variant = SPECIAL if special else PLAIN
        for length in lengths:
            for seed in seeds:
                record = runner(length, special, seed)
                records.append(record)
                points.setdefault((variant, length), []).append(record)
    return SweepResult(summarize(points), records)


def sweep_prefix_variants(variants: Sequence[str], lengths: Sequence[int], seeds: Sequence[int],
                          runner: VariantRunner) -> SweepResult:
    """
    Same rows and statistics as the length sweep, one series per
    location/scope variant (keys of `PREFIX_VARIANTS`).
    """
    unknown = [variant for variant in variants if variant not in PREFIX_VARIANTS]
    if unknown:
        raise ConfigError(f"unknown prefix variant '{unknown[0]}'; choose from {', '.join(PREFIX_VARIANTS)}")
    points: Dict[Tuple[str, int], List[RunRecord]] = {}
    records = []
    for variant in variants:
        for length in lengths:
            for seed in seeds:
                record = runner(variant, length, seed)
                records.append(record)
                points.setdefault((variant, length), []).append(record)
    return SweepResult(summarize(points, variants), records)


def write_sweep_tsv(result: SweepResult, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["\t".join(COLUMNS)]
    for row in result.rows:
        lines.append(f"{row.variant}\t{row.length}\t{row.mean_em:.6f}\t{row.variance:.6f}\t{row.stddev:.6f}\t{row.runs}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def read_sweep_tsv(path: Union[str, Path]) -> SweepResult:
    lines = Path(path).read_text(encoding="utf-8").splitlines()[1:]
    rows = []
    for line in lines:
        if not line.strip():
            continue
        variant, length, mean, variance, stddev, runs = line.split("\t")
        rows.append(SweepRow(variant, int(length), float(mean), float(variance), float(stddev), int(runs)))
    return SweepResult(rows)


def render_sweep_svg(result: SweepResult, path: Union[str, Path], width: int = 640, height: int = 400) -> Path:
    """Static line plot of mean EM against prefix length, one line per variant in row order."""
    margin = 50
    lengths = sorted({row.length for row in result.rows}) or [0]
    low, high = lengths[0], max(lengths[-1], lengths[0] + 1)

    def x(length):
        return margin + (length - low) / (high - low) * (width - 2 * margin)

    def y(em):
        return height - margin - em * (height - 2 * margin)

    lines = []
    variants = list(dict.fromkeys(row.variant for row in result.rows))
    for index, variant in enumerate(variants):
        color = PALETTE[index % len(PALETTE)]
        points = result.series(variant)
        if points:
            lines.append({
                "label": variant,
                "color": color,
                "points": " ".join(f"{x(length):.1f},{y(mean):.1f}" for length, mean, _ in points),
                "bars": [(f"{x(length):.1f}", f"{y(min(1.0, mean + std)):.1f}", f"{y(max(0.0, mean - std)):.1f}")
                         for length, mean, std in points],
            })
    ticks = [(f"{x(length):.1f}", length) for length in lengths]
    levels = [(f"{y(level / 4):.1f}", f"{level / 4:.2f}") for level in range(5)]
    return render_to("sweep.svg.j2", path, width=width, height=height, margin=margin, lines=lines,
                     ticks=ticks, levels=levels)
