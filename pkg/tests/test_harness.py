import numpy as np
import pytest
from rich.console import Console

from toptune.config.base import (BUDGET_FILE, CHECKPOINT_FILE, COMPARISON_FILE, GRID_FILE, GRID_SEEDS, MANIFEST_FILE,
                                 MODEL_CONFIG_FILE, REPORT_FILE, RUN_RECORDS_FILE, SWEEP_DATA_FILE, SWEEP_PLOT_FILE,
                                 TRAIN_LOG_FILE, VOCAB_FILE, WORKERS_ENV)
from toptune.errors import ConfigError, SearchError
from toptune.harness.budget_table import budget_table, print_budget_table, reference_strategies, write_budget_tsv
from toptune.harness.experiment import Experiment, TrialRunner, compare_special_ft, load_splits, write_comparison_tsv
from toptune.harness.grid import (FULL_SPLIT, ExperimentGrid, grid_strategies, print_grid, spis_split, train_grid,
                                  write_grid_tsv)
from toptune.harness.lengths import WITH, WITHOUT, length_table, write_lengths_tsv
from toptune.harness.report import render_report, summarize_records
from toptune.harness.search import (RunRecord, SearchSpace, Trial, load_records, print_search_summary, random_search,
                                    save_records, worker_count)
from toptune.harness.sweep import (PLAIN, PREFIX_VARIANTS, SPECIAL, read_sweep_tsv, render_sweep_svg,
                                   sweep_prefix_length, sweep_prefix_variants, write_sweep_tsv)
from toptune.helpers.run_directory import create_run_directory, read_manifest, record_output, slugify
from toptune.semantics.dataset import save_tsv
from toptune.semantics.tree import decouple
from toptune.tuning.strategy import TuningStrategy


def test_prefix_table_trials():
    trials = SearchSpace().sample()
    assert len(trials) == 16
    assert trials[0] == Trial(0, 3.19e-05, 16, 50, 800)
    assert trials[15] == Trial(15, 3.70e-05, 16, 20, 300)


def test_other_table_trials():
    trials = SearchSpace(family="other").sample()
    assert trials[1] == Trial(1, 7.34e-05, 16)
    assert all(trial.prefix_length is None for trial in trials)


def test_fixed_length_overwrites_every_prefix_trial():
    trials = SearchSpace(fixed_length=5).sample()
    assert {trial.prefix_length for trial in trials} == {5}
    assert trials[0].lr == 3.19e-05


def test_random_mode_draws_from_the_ranges():
    space = SearchSpace(mode="random", trials=40, master_seed=7)
    trials = space.sample()
    assert trials == SearchSpace(mode="random", trials=40, master_seed=7).sample()
    assert trials != SearchSpace(mode="random", trials=40, master_seed=8).sample()
    for trial in trials:
        assert space.lr_range[0] <= trial.lr <= space.lr_range[1] * 1.01
        assert trial.batch_size in space.batch_sizes
        assert trial.prefix_length in space.prefix_lengths
        assert trial.mid_dim in space.mid_dims


def test_one_point_space_repeats_one_trial():
    space = SearchSpace(mode="random", trials=3, lr_range=(1e-4, 1e-4), batch_sizes=(8,), prefix_lengths=(5,),
                        mid_dims=(16,))
    assert {(t.lr, t.batch_size, t.prefix_length, t.mid_dim) for t in space.sample()} == {(1e-4, 8, 5, 16)}


@pytest.mark.parametrize("kwargs", [
    {"family": "lora"},
    {"mode": "grid"},
    {"trials": 0},
    {"trials": 17},
])
def test_invalid_search_spaces(kwargs):
    with pytest.raises(ConfigError):
        SearchSpace(**kwargs)


def test_search_space_from_key_values():
    space = SearchSpace.from_key_values({"search.trials": "4", "search.mode": "random", "train.lr": "1"}, "other")
    assert (space.family, space.trials, space.mode) == ("other", 4, "random")
    with pytest.raises(ConfigError):
        SearchSpace.from_key_values({"search.budget": "4"}, "prefix")


def _scripted_runner(table):
    """Runner returning (validation, test, diverged) looked up by (trial index, seed)."""
    def run(trial, seed):
        validation, test, diverged = table[(trial.index, seed)]
        return RunRecord("FT", {"index": trial.index, "lr": trial.lr, "batch_size": trial.batch_size}, seed,
                         validation, test, diverged=diverged)
    return run


def test_mean_over_seeds_beats_a_lucky_seed():
    table = {
        (0, 0): (0.9, 0.8, False), (0, 1): (0.1, 0.1, False), (0, 2): (0.1, 0.1, False),
        (1, 0): (0.5, 0.4, False), (1, 1): (0.5, 0.5, False), (1, 2): (0.5, 0.6, False),
    }
    result = random_search(SearchSpace(family="other", trials=2), _scripted_runner(table), workers=1)
    assert result.winner.index == 1
    assert result.validation_em == pytest.approx(0.5)
    assert result.test_em == pytest.approx(0.5)
    assert [(r.trial_index, r.seed) for r in result.records] == sorted(table)


def test_diverged_seeds_are_left_out_of_the_mean():
    table = {
        (0, 0): (0.0, 0.0, True), (0, 1): (0.6, 0.6, False), (0, 2): (0.6, 0.6, False),
        (1, 0): (0.5, 0.5, False), (1, 1): (0.5, 0.5, False), (1, 2): (0.5, 0.5, False),
    }
    result = random_search(SearchSpace(family="other", trials=2), _scripted_runner(table), workers=1)
    assert result.winner.index == 0
    assert result.means[0] == pytest.approx(0.6)


def test_ties_go_to_the_earlier_trial():
    table = {(index, seed): (0.5, 0.5, False) for index in range(3) for seed in (4, 5)}
    result = random_search(SearchSpace(family="other", trials=3, seeds=2, master_seed=4),
                           _scripted_runner(table), workers=1)
    assert result.winner.index == 0


def test_search_summary_marks_diverged_runs():
    table = {
        (0, 0): (0.0, 0.0, True), (0, 1): (0.6, 0.6, False), (0, 2): (0.6, 0.6, False),
        (1, 0): (0.0, 0.0, True), (1, 1): (0.0, 0.0, True), (1, 2): (0.0, 0.0, True),
    }
    result = random_search(SearchSpace(family="other", trials=2), _scripted_runner(table), workers=1)
    console = Console(record=True, width=120)
    print_search_summary(result, console)
    rows = [line for line in console.export_text().splitlines() if "0.6000" in line or " - " in line]
    assert len(rows) == 2
    assert 1 not in result.means


def test_all_diverged_search_fails():
    table = {(index, seed): (0.0, 0.0, True) for index in range(2) for seed in range(3)}
    with pytest.raises(SearchError):
        random_search(SearchSpace(family="other", trials=2), _scripted_runner(table), workers=1)


class _CountingRunner:
    """Records how often it was prepared and how many jobs the same instance served."""

    def __init__(self):
        self.builds = 0
        self.calls = 0

    def prepare(self):
        self.builds += 1

    def __call__(self, trial, seed):
        self.calls += 1
        return RunRecord("FT", {"index": trial.index, "builds": self.builds, "calls": self.calls}, seed,
                         0.1 * trial.index, 0.0)


def test_pool_workers_prepare_their_runner_once():
    result = random_search(SearchSpace(family="other", trials=3, seeds=2), _CountingRunner(), workers=2)
    assert [(r.trial_index, r.seed) for r in result.records] == [(i, s) for i in range(3) for s in range(2)]
    assert all(record.trial["builds"] == 1 for record in result.records)
    assert max(record.trial["calls"] for record in result.records) > 1
    assert result.winner.index == 2


def test_worker_count(monkeypatch):
    monkeypatch.delenv(WORKERS_ENV, raising=False)
    assert worker_count() == 1
    monkeypatch.setenv(WORKERS_ENV, "3")
    assert worker_count() == 3
    monkeypatch.setenv(WORKERS_ENV, "0")
    assert worker_count() == 1
    monkeypatch.setenv(WORKERS_ENV, "many")
    with pytest.raises(ConfigError):
        worker_count()


def test_records_file(tmp_path):
    records = [RunRecord("BitFit", {"index": 2, "lr": 1e-4, "batch_size": 8}, 1, 0.25, 0.5, 12, 3.5)]
    assert load_records(save_records(records, tmp_path / RUN_RECORDS_FILE)) == records


def _sweep_runner(length, special, seed):
    test_em = length / 100 + (0.2 if special else 0.0) + 0.1 * seed
    return RunRecord(SPECIAL if special else PLAIN, {"index": 0, "lr": 1e-4, "batch_size": 8}, seed, test_em, test_em)


def test_sweep_rows_hold_mean_and_population_variance():
    result = sweep_prefix_length([1, 5, 10], [0, 1], _sweep_runner)
    assert [(row.variant, row.length) for row in result.rows] == [
        (PLAIN, 1), (PLAIN, 5), (PLAIN, 10), (SPECIAL, 1), (SPECIAL, 5), (SPECIAL, 10)]
    assert len(result.records) == 12
    first = result.rows[0]
    assert first.mean_em == pytest.approx(0.06)
    assert first.variance == pytest.approx(0.0025)
    assert first.stddev == pytest.approx(0.05)
    assert result.rows[3].mean_em == pytest.approx(0.26)


def test_sweep_files(tmp_path):
    result = sweep_prefix_length([1, 5], [0, 1, 2], _sweep_runner)
    loaded = read_sweep_tsv(write_sweep_tsv(result, tmp_path / SWEEP_DATA_FILE))
    assert [(row.variant, row.length, row.runs) for row in loaded.rows] == \
        [(row.variant, row.length, row.runs) for row in result.rows]
    assert np.allclose([row.mean_em for row in loaded.rows], [row.mean_em for row in result.rows], atol=1e-6)
    svg = render_sweep_svg(loaded, tmp_path / SWEEP_PLOT_FILE).read_text(encoding="utf-8")
    assert svg.startswith("<svg")
    assert svg.count("<polyline") == 2
    assert PLAIN in svg and SPECIAL in svg


def _variant_runner(variant, length, seed):
    test_em = list(PREFIX_VARIANTS).index(variant) / 10 + length / 100 + 0.01 * seed
    return RunRecord(variant, {"index": 0, "lr": 1e-4, "batch_size": 8}, seed, test_em, test_em)


def test_variant_sweep_keeps_the_requested_order(tmp_path):
    variants = ["suffix", "prefix", "top2_decoder", "prefix_and_suffix"]
    result = sweep_prefix_variants(variants, [1, 5], [0, 1], _variant_runner)
    assert [row.variant for row in result.rows] == [variant for variant in variants for _ in (1, 5)]
    assert len(result.records) == 16
    assert result.series("suffix")[0][1] == pytest.approx(0.115)
    svg = render_sweep_svg(result, tmp_path / SWEEP_PLOT_FILE).read_text(encoding="utf-8")
    assert svg.count("<polyline") == 4
    assert all(variant in svg for variant in variants)


def test_variant_sweep_rejects_unknown_variants():
    with pytest.raises(ConfigError, match="lora"):
        sweep_prefix_variants(["prefix", "lora"], [1], [0], _variant_runner)


@pytest.mark.parametrize("variant", list(PREFIX_VARIANTS))
def test_prefix_variants_build_strategies(variant):
    strategy = TuningStrategy.prefix(5).with_values(**PREFIX_VARIANTS[variant])
    assert (strategy.location, strategy.layer_scope) == tuple(PREFIX_VARIANTS[variant].values())
    assert strategy.name == "Prefix5"


def test_budget_table_at_reference_scale(tmp_path):
    reports = budget_table()
    assert [report.strategy for report in reports] == [s.name for s in reference_strategies()]
    console = Console(record=True, width=200)
    print_budget_table(reports, console)
    text = console.export_text()
    assert "2,211,840" in text and "2,264,064" in text and "0.54%" in text
    lines = write_budget_tsv(reports, tmp_path / BUDGET_FILE).read_text(encoding="utf-8").splitlines()
    assert lines[0].split("\t")[0] == "strategy"
    prefix30 = next(line.split("\t") for line in lines if line.startswith("Prefix30\t"))
    assert prefix30[2] == "2211840" and prefix30[5] == "0.54%"


def test_budget_table_for_a_toy_model(config):
    reports = budget_table([TuningStrategy.bitfit(), TuningStrategy.prefix(3)], config=config)
    assert reports[0].total_count == reports[1].total_count
    assert reports[1].materialized_count == 3 * 2 * 2 * 3 * config.hid_dim


def test_special_tokens_shorten_targets(tmp_path, tokenizer, corpus):
    table = length_table(corpus, tokenizer)
    assert table.rows[WITH].mean < table.rows[WITHOUT].mean
    assert table.reduction > 0
    assert table.multi_token_labels == []
    assert table.rows[WITH].count == len(corpus)
    lines = write_lengths_tsv(table, tmp_path / "lengths.tsv").read_text(encoding="utf-8").splitlines()
    assert lines[1].startswith(WITHOUT) and lines[2].startswith(WITH)


def _fill_run_directory(run_dir):
    records = [
        RunRecord("BitFit", {"index": trial, "lr": 1e-4, "batch_size": 8}, seed, 0.1 * (trial + seed), 0.2, 40)
        for trial in range(2) for seed in range(3)
    ]
    save_records(records, run_dir / RUN_RECORDS_FILE)
    write_sweep_tsv(sweep_prefix_length([1, 5], [0, 1], _sweep_runner), run_dir / SWEEP_DATA_FILE)
    write_budget_tsv(budget_table(), run_dir / BUDGET_FILE)
    return records


def test_report_is_reproducible(tmp_path):
    records = _fill_run_directory(tmp_path)
    first = render_report(tmp_path).read_bytes()
    plot = (tmp_path / SWEEP_PLOT_FILE).read_bytes()
    second = render_report(tmp_path).read_bytes()
    assert first == second
    assert (tmp_path / SWEEP_PLOT_FILE).read_bytes() == plot
    text = first.decode("utf-8")
    assert "## Selected trials" in text and "## Prefix length sweep" in text and "## Parameter budget" in text
    (summary,) = summarize_records(records)
    assert summary["trial"] == 1 and summary["runs"] == 3
    assert f"| BitFit | 1 | 3 | {summary['validation_em']} |" in text


def test_report_needs_a_run_directory(tmp_path):
    with pytest.raises(ConfigError):
        render_report(tmp_path / "missing")


def test_report_of_an_empty_run_directory(tmp_path):
    text = render_report(tmp_path).read_text(encoding="utf-8")
    assert text.startswith(f"# {tmp_path.name}")
    assert "Selected trials" not in text
    assert (tmp_path / REPORT_FILE).is_file()


def test_run_directory_manifest(tmp_path):
    run_dir = create_run_directory(tmp_path, "BitFit seed 0!", "train", {"train.lr": "1e-4", "data.seed": "0"},
                                   ["exp.conf"])
    assert run_dir.name == "BitFit-seed-0"
    manifest = read_manifest(run_dir)
    assert manifest["command"] == "train"
    assert list(manifest["config"]) == ["data.seed", "train.lr"]
    assert manifest["inputs"] == ["exp.conf"]
    record_output(run_dir, run_dir / REPORT_FILE)
    record_output(run_dir, run_dir / REPORT_FILE)
    assert read_manifest(run_dir)["outputs"] == [REPORT_FILE]
    assert (run_dir / MANIFEST_FILE).is_file()


def test_unusable_run_names():
    assert slugify("†Prefix30") == "Prefix30"
    with pytest.raises(ConfigError):
        slugify("!!!")
    with pytest.raises(ConfigError):
        read_manifest("/nonexistent-run-directory")


def test_load_generated_splits():
    splits = load_splits({"data.sizes": "20,5,5", "data.seed": "1"})
    assert (len(splits.train), len(splits.dev), len(splits.test)) == (20, 5, 5)
    assert all(decouple(example.tree) == example.tree for example in splits.train)
    assert not splits.low_data
    assert splits.labels == sorted(splits.labels)
    few = load_splits({"data.sizes": "40,5,5", "data.spis": "1"})
    assert few.low_data and len(few.train) < 40


def test_load_splits_from_files(tmp_path, corpus):
    for name, part in (("train", corpus[:10]), ("dev", corpus[10:15]), ("test", corpus[15:20])):
        save_tsv(part, tmp_path / f"{name}.tsv")
    values = {f"data.{name}": str(tmp_path / f"{name}.tsv") for name in ("train", "dev", "test")}
    splits = load_splits(values)
    assert splits.train == corpus[:10]
    with pytest.raises(ConfigError):
        load_splits({"data.train": values["data.train"]})
    with pytest.raises(ConfigError):
        load_splits({"data.sizes": "10,5"})


EXPERIMENT_VALUES = {
    "data.sizes": "16,4,4",
    "data.seed": "0",
    "tokenizer.vocab_size": "300",
    "model.encoder_layers": "1",
    "model.decoder_layers": "2",
    "model.heads": "2",
    "model.hid_dim": "16",
    "model.ffn_dim": "32",
    "model.max_positions": "64",
    "train.max_epochs": "2",
    "train.batch_size": "4",
    "train.gradient_accumulation_steps": "1",
    "train.beam_size": "2",
    "train.max_target_length": "40",
}


@pytest.mark.slow
def test_experiment_runs_write_their_artifacts(tmp_path):
    experiment = Experiment(EXPERIMENT_VALUES)
    base = experiment.base.checksum()
    record = experiment.run(TuningStrategy.bitfit(), experiment.train_config, seed=0, run_dir=tmp_path)
    assert record.strategy == "BitFit" and record.budget > 0 and not record.diverged
    assert 0.0 <= record.test_em <= 1.0
    for name in (CHECKPOINT_FILE, TRAIN_LOG_FILE, MODEL_CONFIG_FILE, VOCAB_FILE):
        assert (tmp_path / name).is_file()
    assert experiment.base.checksum() == base

    untrained = experiment.run(TuningStrategy.prefix(0), experiment.train_config, seed=0)
    assert untrained.budget == 0 and untrained.log_path == ""


@pytest.mark.slow
def test_trial_runner_applies_the_trial(tmp_path):
    runner = TrialRunner(EXPERIMENT_VALUES, TuningStrategy.prefix(3, mid_dim=8).with_values(base_dim=4), tmp_path)
    record = runner(Trial(2, 1e-3, 4, prefix_length=2, mid_dim=8), seed=1)
    assert record.trial["index"] == 2 and record.trial["prefix_length"] == 2
    assert record.trial["lr"] == 1e-3
    assert (tmp_path / "trial02-seed1" / CHECKPOINT_FILE).is_file()


@pytest.mark.slow
def test_special_token_full_fine_tuning_comparison():
    experiment = Experiment(EXPERIMENT_VALUES)
    outcome = compare_special_ft(experiment, [0, 1], experiment.train_config.with_values(max_epochs=1))
    assert set(outcome) == {"FT", "†FT"}
    for row in outcome.values():
        assert len(row["test_em"]) == 2
        assert row["mean_test_em"] == pytest.approx(np.mean(row["test_em"]))


def test_comparison_file(tmp_path):
    outcome = {"FT": {"test_em": [0.5, 0.7], "mean_test_em": 0.6},
               "†FT": {"test_em": [0.75, 0.75], "mean_test_em": 0.75}}
    lines = write_comparison_tsv(outcome, tmp_path / COMPARISON_FILE).read_text(encoding="utf-8").splitlines()
    assert lines == ["strategy\ttest_em\tmean_test_em",
                     "FT\t0.500000,0.700000\t0.600000",
                     "†FT\t0.750000,0.750000\t0.750000"]


def test_grid_strategies():
    assert [strategy.name for strategy in grid_strategies()] == ["FT", "FT-Top2", "Prefix30", "†Prefix30", "BitFit"]
    shaped = grid_strategies({"prefix.length": "5", "prefix.location": "suffix", "prefix.special_tokens": "true",
                              "train.lr": "1e-3"})
    assert [strategy.name for strategy in shaped][2:4] == ["Prefix5", "†Prefix5"]
    assert shaped[2].location == shaped[3].location == "suffix"


LOW = spis_split(10)
GRID_SCORES = {
    (FULL_SPLIT, "FT"): 0.95, (FULL_SPLIT, "FT-Top2"): 0.9, (FULL_SPLIT, "Prefix30"): 0.6,
    (FULL_SPLIT, "†Prefix30"): 0.8, (FULL_SPLIT, "BitFit"): 0.5,
    (LOW, "FT"): 0.5, (LOW, "FT-Top2"): 0.2, (LOW, "Prefix30"): 0.4, (LOW, "†Prefix30"): 0.45, (LOW, "BitFit"): 0.3,
}


def _grid_runner(split, strategy, seed):
    info = {"index": 0, "lr": 1e-4, "batch_size": 8}
    if split == LOW and strategy.name == "BitFit" and seed == 2:
        return RunRecord(strategy.name, info, seed, 0.0, 0.0, diverged=True)
    test_em = GRID_SCORES[(split, strategy.name)] + 0.01 * (seed - 1)
    return RunRecord(strategy.name, info, seed, test_em, test_em)


def test_grid_cells_and_orderings(tmp_path):
    result = train_grid(grid_strategies(), [FULL_SPLIT, LOW], range(3), _grid_runner)
    assert len(result.cells) == 10 and len(result.records[LOW]) == 15
    assert result.mean(FULL_SPLIT, "FT") == pytest.approx(0.95)
    bitfit = result.cell(LOW, "BitFit")
    assert (bitfit.runs, bitfit.diverged) == (3, 1)
    assert bitfit.mean_test_em == pytest.approx(0.295)
    assert all(check.passed for check in result.checks("Prefix30", LOW))
    strict = result.checks("Prefix30", LOW, ft_floor=0.96)
    assert [check.passed for check in strict] == [False, True, True, True]
    with pytest.raises(KeyError):
        result.cell(LOW, "Prefix5")

    lines = write_grid_tsv(result, tmp_path / GRID_FILE).read_text(encoding="utf-8").splitlines()
    assert lines[0].split("\t")[:3] == ["split", "strategy", "mean_test_em"]
    assert "10spis\tBitFit\t0.295000\t0.295000\t3\t1" in lines

    console = Console(record=True, width=120)
    print_grid(result, strict, console)
    text = console.export_text()
    assert "†Prefix30" in text
    assert text.count("holds") == 3 and text.count("fails") == 1


def test_experiment_grid_configuration():
    grid = ExperimentGrid({"data.spis": "3", "grid.lr.prefix": "5e-3"}, spis=10)
    assert grid.splits == [FULL_SPLIT, "10spis"]
    assert "data.spis" not in grid.values
    assert grid.lrs == {"prefix": 5e-3}
    with pytest.raises(ConfigError):
        ExperimentGrid({"grid.lr.lora": "1e-3"})


def test_experiment_grid_builds_one_experiment_per_split():
    grid = ExperimentGrid({**EXPERIMENT_VALUES, "data.sizes": "40,4,4"}, spis=1)
    low = grid.experiment(spis_split(1))
    assert low.splits.low_data and len(low.splits.train) < 40
    assert not grid.experiment(FULL_SPLIT).splits.low_data
    assert grid.experiment(spis_split(1)) is low


DESK_VALUES = {
    "data.seed": "0",
    "tokenizer.vocab_size": "300",
    "model.encoder_layers": "2",
    "model.decoder_layers": "2",
    "model.heads": "4",
    "model.hid_dim": "32",
    "model.ffn_dim": "64",
    "model.max_positions": "96",
    "prefix.mid_dim": "64",
    "train.lr": "1e-3",
    "train.batch_size": "16",
    "train.gradient_accumulation_steps": "1",
    "train.max_epochs": "20",
    "train.early_stopping_patience": "5",
    "train.warm_start_epochs": "3",
    "train.beam_size": "1",
    "train.max_target_length": "64",
    "grid.lr.prefix": "5e-3",
    "grid.lr.bitfit": "5e-3",
}


@pytest.mark.slow
def test_desk_scale_grid_reaches_the_expected_orderings():
    grid = ExperimentGrid(DESK_VALUES)
    strategies = grid_strategies(DESK_VALUES)
    result = train_grid(strategies, grid.splits, range(GRID_SEEDS), grid)
    assert len(grid.experiment(FULL_SPLIT).splits.train) == 2000
    checks = result.checks(strategies[2].name, grid.splits[1])
    assert [check.description for check in checks if not check.passed] == []
