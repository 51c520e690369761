from collections import defaultdict
from pathlib import Path
from typing import Dict, List, Union

import numpy as np

from toptune.config.base import BUDGET_FILE, LENGTHS_FILE, REPORT_FILE, RUN_RECORDS_FILE, SWEEP_DATA_FILE, SWEEP_PLOT_FILE
from toptune.errors import ConfigError
from toptune.harness.rendering import render_to
from toptune.harness.search import RunRecord, load_records
from toptune.harness.sweep import read_sweep_tsv, render_sweep_svg


def _read_tsv(path: Path) -> List[List[str]]:
    return [line.split("\t") for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]


def summarize_records(records: List[RunRecord]) -> List[Dict[str, object]]:
    """Per strategy: the trial with the best mean validation EM and its seed statistics."""
    grouped: Dict[str, Dict[int, List[RunRecord]]] = defaultdict(lambda: defaultdict(list))
    for record in records:
        if not record.diverged:
            grouped[record.strategy][record.trial_index].append(record)
    rows = []
    for strategy in sorted(grouped):
        trials = grouped[strategy]
        means = {index: float(np.mean([r.validation_em for r in runs])) for index, runs in trials.items()}
        best = max(means, key=lambda index: (means[index], -index))
        tests = [r.test_em for r in trials[best]]
        rows.append({
            "strategy": strategy,
            "trial": best,
            "runs": len(tests),
            "validation_em": f"{100 * means[best]:.2f}",
            "test_em": f"{100 * float(np.mean(tests)):.2f}",
            "test_std": f"{100 * float(np.std(tests)):.2f}",
            "budget": f"{trials[best][0].budget:,}",
        })
    return rows


def render_report(run_dir: Union[str, Path]) -> Path:
    """
    Builds report.md (and the sweep plot when sweep data exists) from the
    archived files of a run directory. Output depends only on those files.
    """
    run_dir = Path(run_dir)
    if not run_dir.is_dir():
        raise ConfigError(f"Run directory not found: {run_dir}")
    records_path = run_dir / RUN_RECORDS_FILE
    records = sorted(load_records(records_path), key=lambda r: (r.strategy, r.trial_index, r.seed)) \
        if records_path.is_file() else []
    sweep_rows = []
    if (run_dir / SWEEP_DATA_FILE).is_file():
        sweep = read_sweep_tsv(run_dir / SWEEP_DATA_FILE)
        render_sweep_svg(sweep, run_dir / SWEEP_PLOT_FILE)
        sweep_rows = sweep.rows
    budget = _read_tsv(run_dir / BUDGET_FILE) if (run_dir / BUDGET_FILE).is_file() else []
    lengths = _read_tsv(run_dir / LENGTHS_FILE) if (run_dir / LENGTHS_FILE).is_file() else []
    return render_to(
        "report.md.j2", run_dir / REPORT_FILE,
        title=run_dir.name,
        summary=summarize_records(records),
        records=records,
        sweep=sweep_rows,
        sweep_plot=SWEEP_PLOT_FILE if sweep_rows else None,
        budget=budget,
        lengths=lengths,
    )
