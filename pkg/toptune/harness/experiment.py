"""
End-to-end experiment plumbing: data preparation, the shared base model,
and single (strategy, hyperparameters, seed) runs that produce RunRecords.
"""

import time
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from toptune.config.base import DEFAULT_SPLIT_SIZES, DEFAULT_VOCAB_SIZE, MODEL_CONFIG_FILE, TRAIN_LOG_FILE
from toptune.datagen.generate import generate
from toptune.datagen.grammar import default_grammar, load_grammar
from toptune.datagen.sampling import SpisSpec, spis_sample, split_corpus
from toptune.errors import ConfigError, DivergenceError
from toptune.harness.search import RunRecord, Trial
from toptune.helpers.key_value import as_bool, as_int, section
from toptune.helpers.logs import Log
from toptune.model.config import ModelConfig
from toptune.model.transformer import init_params
from toptune.numeric.params import ParamStore
from toptune.semantics.dataset import Example, load_tsv
from toptune.semantics.tree import label_openers
from toptune.tokenizer.tokenizer import Tokenizer
from toptune.training.config import TrainConfig
from toptune.training.data import duplicate_low_data
from toptune.training.evaluate import evaluate
from toptune.training.trainer import train
from toptune.training.warm_start import warm_start
from toptune.tuning.apply import apply_strategy
from toptune.tuning.strategy import PREFIX, TuningStrategy


@dataclass
class DataSplits:
    train: List[Example]
    dev: List[Example]
    test: List[Example]
    low_data: bool = False

    @property
    def labels(self) -> List[str]:
        """Every label opener seen in any split, sorted."""
        return sorted({opener for split in (self.train, self.dev, self.test)
                       for example in split for opener in label_openers(example.tree)})


def load_splits(values: Dict[str, str]) -> DataSplits:
    """
    `data.train`/`data.dev`/`data.test` TSV paths, or a generated corpus
    (`data.grammar`, `data.seed`, `data.sizes`). `data.decoupled` converts
    targets to TOP-Decoupled; `data.spis` > 0 replaces the training split
    with a few-shot sample.
    """
    data = section(values, "data")
    if "train" in data:
        missing = [key for key in ("dev", "test") if key not in data]
        if missing:
            raise ConfigError(f"data.train given without data.{missing[0]}")
        train_split, dev, test = (load_tsv(data[key]) for key in ("train", "dev", "test"))
    else:
        grammar = load_grammar(data["grammar"]) if "grammar" in data else default_grammar()
        sizes = tuple(int(size) for size in data["sizes"].split(",")) if "sizes" in data else DEFAULT_SPLIT_SIZES
        if len(sizes) != 3:
            raise ConfigError("data.sizes needs three comma-separated sizes (train,dev,test)")
        seed = as_int(data.get("seed", "0"), "data.seed")
        train_split, dev, test = split_corpus(generate(grammar, sum(sizes), seed), sizes, seed)
    if as_bool(data.get("decoupled", "true"), "data.decoupled"):
        train_split, dev, test = ([e.decoupled() for e in split] for split in (train_split, dev, test))
    spis = as_int(data.get("spis", "0"), "data.spis")
    if spis > 0:
        sample = spis_sample(train_split, SpisSpec(spis, as_int(data.get("seed", "0"), "data.seed")))
        return DataSplits(sample.examples, list(dev), list(test), low_data=True)
    return DataSplits(list(train_split), list(dev), list(test))


class Experiment:
    """Shared state of one experiment: splits, tokenizer and the frozen base model."""

    def __init__(self, values: Dict[str, str], splits: Optional[DataSplits] = None):
        self.values = dict(values)
        self.splits = splits or load_splits(values)
        self.train_config = TrainConfig.from_key_values(values)
        vocab_size = as_int(values.get("tokenizer.vocab_size", str(DEFAULT_VOCAB_SIZE)), "tokenizer.vocab_size")
        self.tokenizer = Tokenizer.build([e.utterance for e in self.splits.train], vocab_size)
        self.special_tokenizer = self.tokenizer.with_labels(self.splits.labels)
        self.model_config = ModelConfig.from_key_values(values).with_vocab_size(len(self.tokenizer))
        self.base = init_params(self.model_config, as_int(values.get("base.seed", "0"), "base.seed"))
        if self.train_config.warm_start_epochs:
            warm_start(self.model_config, self.base, self.tokenizer, [e.utterance for e in self.splits.train],
                       self.train_config.warm_start_epochs, seed=self.train_config.seed)

    def training_split(self, config: TrainConfig) -> List[Example]:
        if self.splits.low_data:
            return duplicate_low_data(self.splits.train, config.low_data_duplication_target)
        return self.splits.train

    def run(self, strategy: TuningStrategy, config: TrainConfig, seed: int, trial: Optional[Trial] = None,
            run_dir: Optional[Path] = None) -> RunRecord:
        """Applies `strategy` to a copy of the base model, trains, and scores dev and test."""
        started = time.monotonic()
        config = config.with_values(seed=seed)
        store: ParamStore = self.base.copy()
        tokenizer = self.special_tokenizer if strategy.special_tokens else self.tokenizer
        artifacts = apply_strategy(strategy, self.model_config, store, tokenizer, seed)
        trial_info = {"index": trial.index if trial else 0, "lr": config.lr, "batch_size": config.batch_size}
        if strategy.variant == PREFIX:
            trial_info.update(prefix_length=strategy.length, mid_dim=strategy.mid_dim)
        budget = store.trainable_count()
        log_path = ""
        try:
            if budget:
                result = train(config, artifacts, store, tokenizer, self.training_split(config), self.splits.dev,
                               run_dir)
                validation_em = result.best_em
                log_path = str(Path(run_dir) / TRAIN_LOG_FILE) if run_dir else ""
            else:
                validation_em = evaluate(store, artifacts, tokenizer, self.splits.dev, config.beam_size,
                                         config.max_target_length).em
        except DivergenceError as e:
            Log.warning(f"{strategy.name} seed {seed} diverged: {e}")
            return RunRecord(strategy.name, trial_info, seed, 0.0, 0.0, budget, round(time.monotonic() - started, 3),
                             log_path, diverged=True)
        test_em = evaluate(store, artifacts, tokenizer, self.splits.test, config.beam_size,
                           config.max_target_length).em
        if run_dir is not None:
            artifacts.config.save(Path(run_dir) / MODEL_CONFIG_FILE)
            tokenizer.save(run_dir)
        Log.trial(trial_info["index"], seed, validation_em, test_em)
        return RunRecord(strategy.name, trial_info, seed, validation_em, test_em, budget,
                         round(time.monotonic() - started, 3), log_path)


class TrialRunner:
    """
    Picklable search runner. Pickling drops the built Experiment; a pool
    worker rebuilds it once in `prepare()` and reuses it for every job.
    """

    def __init__(self, values: Dict[str, str], strategy: TuningStrategy, run_root: Optional[Path] = None):
        self.values = values
        self.strategy = strategy
        self.run_root = run_root
        self._experiment: Optional[Experiment] = None

    def __getstate__(self):
        state = dict(self.__dict__)
        state["_experiment"] = None
        return state

    def prepare(self) -> None:
        if self._experiment is None:
            self._experiment = Experiment(self.values)

    @property
    def experiment(self) -> Experiment:
        self.prepare()
        return self._experiment

    def __call__(self, trial: Trial, seed: int) -> RunRecord:
        strategy = self.strategy
        if strategy.variant == PREFIX and trial.prefix_length is not None:
            strategy = strategy.with_values(length=trial.prefix_length, mid_dim=trial.mid_dim or strategy.mid_dim)
        config = self.experiment.train_config.with_values(lr=trial.lr, batch_size=trial.batch_size)
        run_dir = None
        if self.run_root is not None:
            run_dir = Path(self.run_root) / f"trial{trial.index:02d}-seed{seed}"
        return self.experiment.run(strategy, config, seed, trial, run_dir)


def compare_special_ft(experiment: Experiment, seeds: Sequence[int],
                       config: Optional[TrainConfig] = None) -> Dict[str, object]:
    """Full fine-tuning with and without label special tokens, test EM per seed and mean."""
    config = config or experiment.train_config
    outcome: Dict[str, object] = {}
    for strategy in (TuningStrategy.full(), TuningStrategy.full(special_tokens=True)):
        records = [experiment.run(strategy, config, seed) for seed in seeds]
        outcome[strategy.name] = {
            "test_em": [record.test_em for record in records],
            "mean_test_em": float(np.mean([record.test_em for record in records])),
        }
    return outcome


def write_comparison_tsv(outcome: Dict[str, object], path: Union[str, Path]) -> Path:
    """One row per strategy: name, comma-separated test EM per seed, mean."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["strategy\ttest_em\tmean_test_em"]
    for name, scores in outcome.items():
        per_seed = ",".join(f"{em:.6f}" for em in scores["test_em"])
        lines.append(f"{name}\t{per_seed}\t{scores['mean_test_em']:.6f}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
