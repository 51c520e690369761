"""
Random hyperparameter search: a fixed budget of trials per strategy family,
each replicated over several seeds, with the winner chosen by mean
validation EM.
"""

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from rich.console import Console
from rich.table import Table

from toptune.config.base import (OTHER_TRIALS, PREFIX_TRIALS, SEARCH_BATCH_SIZES, SEARCH_LR_RANGE, SEARCH_MID_DIMS,
                                 SEARCH_PREFIX_LENGTHS, SEARCH_SEEDS, SEARCH_TRIALS, WORKERS_ENV)
from toptune.errors import ConfigError, SearchError
from toptune.helpers.key_value import as_int, section
from toptune.helpers.logs import Log

PREFIX_FAMILY = "prefix"
OTHER_FAMILY = "other"
TABLE_MODE = "table"
RANDOM_MODE = "random"


@dataclass(frozen=True)
class Trial:
    index: int
    lr: float
    batch_size: int
    prefix_length: Optional[int] = None
    mid_dim: Optional[int] = None


@dataclass(frozen=True)
class SearchSpace:
    """
    `table` mode replays the fixed trial lists; `random` mode draws from the
    ranges with a log-uniform learning rate. `fixed_length` overwrites the
    prefix length of every prefix trial.
    """
    family: str = PREFIX_FAMILY
    mode: str = TABLE_MODE
    trials: int = SEARCH_TRIALS
    seeds: int = SEARCH_SEEDS
    master_seed: int = 0
    fixed_length: Optional[int] = None
    lr_range: Tuple[float, float] = SEARCH_LR_RANGE
    batch_sizes: Tuple[int, ...] = SEARCH_BATCH_SIZES
    prefix_lengths: Tuple[int, ...] = SEARCH_PREFIX_LENGTHS
    mid_dims: Tuple[int, ...] = SEARCH_MID_DIMS

    def __post_init__(self):
        if self.family not in (PREFIX_FAMILY, OTHER_FAMILY):
            raise ConfigError(f"unknown search family '{self.family}'")
        if self.mode not in (TABLE_MODE, RANDOM_MODE):
            raise ConfigError(f"unknown search mode '{self.mode}'")
        if self.trials < 1 or self.seeds < 1:
            raise ConfigError("search needs at least one trial and one seed")
        if self.mode == TABLE_MODE and self.trials > self._table_size():
            raise ConfigError(f"table mode has only {self._table_size()} trials, {self.trials} requested")

    def _table_size(self) -> int:
        return len(PREFIX_TRIALS if self.family == PREFIX_FAMILY else OTHER_TRIALS)

    def sample(self) -> List[Trial]:
        if self.mode == TABLE_MODE:
            trials = self._from_table()
        else:
            trials = self._from_ranges()
        if self.fixed_length is not None and self.family == PREFIX_FAMILY:
            trials = [replace(trial, prefix_length=self.fixed_length) for trial in trials]
        return trials

    def _from_table(self) -> List[Trial]:
        if self.family == PREFIX_FAMILY:
            return [Trial(i, lr, bsz, length, mid) for i, (lr, bsz, length, mid) in enumerate(PREFIX_TRIALS[:self.trials])]
        return [Trial(i, lr, bsz) for i, (lr, bsz) in enumerate(OTHER_TRIALS[:self.trials])]

    def _from_ranges(self) -> List[Trial]:
        rng = np.random.default_rng(self.master_seed)
        low, high = np.log(self.lr_range[0]), np.log(self.lr_range[1])
        trials = []
        for i in range(self.trials):
            lr = float(f"{np.exp(rng.uniform(low, high)):.2e}")
            batch = int(rng.choice(self.batch_sizes))
            if self.family == PREFIX_FAMILY:
                trials.append(Trial(i, lr, batch, int(rng.choice(self.prefix_lengths)), int(rng.choice(self.mid_dims))))
            else:
                trials.append(Trial(i, lr, batch))
        return trials

    @classmethod
    def from_key_values(cls, values: Dict[str, str], family: str) -> "SearchSpace":
        fields = section(values, "search")
        kwargs: Dict[str, object] = {"family": family}
        for key in ("trials", "seeds", "master_seed", "fixed_length"):
            if key in fields:
                kwargs[key] = as_int(fields.pop(key), f"search.{key}")
        if "mode" in fields:
            kwargs["mode"] = fields.pop("mode")
        if fields:
            raise ConfigError(f"unknown search keys: {', '.join('search.' + key for key in sorted(fields))}")
        return cls(**kwargs)


@dataclass
class RunRecord:
    strategy: str
    trial: Dict[str, object]
    seed: int
    validation_em: float
    test_em: float
    budget: int = 0
    seconds: float = 0.0
    log_path: str = ""
    diverged: bool = False

    @property
    def trial_index(self) -> int:
        return int(self.trial["index"])

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> "RunRecord":
        return cls(**json.loads(line))


def save_records(records: Sequence[RunRecord], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("".join(record.to_json() + "\n" for record in records), encoding="utf-8")
    return path


def load_records(path: Union[str, Path]) -> List[RunRecord]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return [RunRecord.from_json(line) for line in lines if line.strip()]


@dataclass
class SearchResult:
    winner: Trial
    validation_em: float
    test_em: float
    records: List[RunRecord] = field(default_factory=list)
    means: Dict[int, float] = field(default_factory=dict)


Runner = Callable[[Trial, int], RunRecord]


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        workers = int(raw)
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    return max(1, workers)


_worker_runner: Optional[Runner] = None


def _start_worker(runner: Runner) -> None:
    """Pool initializer: one runner per worker process, prepared once before any job."""
    global _worker_runner
    _worker_runner = runner
    prepare = getattr(runner, "prepare", None)
    if prepare is not None:
        prepare()


def _run_pooled(job: Tuple[Trial, int]) -> RunRecord:
    trial, seed = job
    return _worker_runner(trial, seed)


def random_search(space: SearchSpace, runner: Runner, workers: Optional[int] = None) -> SearchResult:
    """
    Runs every (trial, seed) pair through `runner` and picks the trial with
    the highest mean validation EM over its non-diverged seeds. With more
    than one worker, jobs go to a process pool and `runner` must be picklable;
    each worker receives it once and calls its `prepare()` (when it has one)
    before the first job.
    """
    trials = space.sample()
    seeds = [space.master_seed + offset for offset in range(space.seeds)]
    jobs = [(trial, seed) for trial in trials for seed in seeds]
    workers = worker_count() if workers is None else workers
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers, initializer=_start_worker, initargs=(runner,)) as pool:
            records = list(pool.map(_run_pooled, jobs))
    else:
        records = [runner(trial, seed) for trial, seed in jobs]
    records.sort(key=lambda record: (record.trial_index, record.seed))

    means: Dict[int, float] = {}
    tests: Dict[int, float] = {}
    for trial in trials:
        kept = [r for r in records if r.trial_index == trial.index and not r.diverged]
        if kept:
            means[trial.index] = float(np.mean([r.validation_em for r in kept]))
            tests[trial.index] = float(np.mean([r.test_em for r in kept]))
    if not means:
        raise SearchError(f"all {len(trials)} trials diverged")
    best = max(means, key=lambda index: (means[index], -index))
    winner = next(trial for trial in trials if trial.index == best)
    Log.success(f"Selected trial {best}: mean dev EM {means[best]:.4f}, mean test EM {tests[best]:.4f}")
    return SearchResult(winner, means[best], tests[best], records, means)


def print_search_summary(result: SearchResult, console: Optional[Console] = None) -> None:
    """Mean dev EM per trial, the winner highlighted."""
    console = console or Console()
    table = Table(title="Search trials")
    for column in ("trial", "seeds", "diverged", "mean dev EM"):
        table.add_column(column, justify="right")
    for index in sorted({record.trial_index for record in result.records}):
        runs = [record for record in result.records if record.trial_index == index]
        mean = f"{result.means[index]:.4f}" if index in result.means else "-"
        style = "bold green" if index == result.winner.index else None
        table.add_row(str(index), str(len(runs)), str(sum(r.diverged for r in runs)), mean, style=style)
    console.print(table)
