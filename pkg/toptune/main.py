import argparse
import sys
from pathlib import Path

from toptune.config.base import (BUDGET_FILE, CHECKPOINT_FILE, COMPARISON_FILE, DATA_PATH, DEFAULT_VOCAB_SIZE, GRID_FILE,
                                 GRID_SEEDS, LENGTHS_FILE, MODEL_CONFIG_FILE, REMINDER_LABEL_COUNT, RUN_RECORDS_FILE,
                                 RUNS_PATH, SEARCH_SEEDS, SPIS_DEFAULT, SWEEP_DATA_FILE, SWEEP_PLOT_FILE)
from toptune.config.package import PACKAGE_VERSION
from toptune.datagen.generate import generate
from toptune.datagen.grammar import default_grammar, expected_depth, load_grammar
from toptune.datagen.sampling import SpisSpec, spis_sample, split_corpus
from toptune.errors import ToptuneError
from toptune.harness.budget_table import budget_table, print_budget_table, write_budget_tsv
from toptune.harness.experiment import Experiment, TrialRunner, compare_special_ft, load_splits, write_comparison_tsv
from toptune.harness.grid import ExperimentGrid, grid_strategies, print_grid, train_grid, write_grid_tsv
from toptune.harness.lengths import WITH, WITHOUT, length_table, write_lengths_tsv
from toptune.harness.report import render_report
from toptune.harness.search import SearchSpace, print_search_summary, random_search, save_records
from toptune.harness.sweep import (PREFIX_VARIANTS, render_sweep_svg, sweep_prefix_length, sweep_prefix_variants,
                                   write_sweep_tsv)
from toptune.helpers.key_value import as_int, load_key_values
from toptune.helpers.logs import Log
from toptune.helpers.run_directory import create_run_directory, record_output
from toptune.helpers.validations import file_exists, folder_exists
from toptune.model.config import ModelConfig
from toptune.numeric.params import ParamStore, load_checkpoint
from toptune.semantics.dataset import convert_file, load_tsv, save_tsv
from toptune.semantics.tree import tree_depth
from toptune.tokenizer.tokenizer import Tokenizer
from toptune.training.config import TrainConfig
from toptune.training.evaluate import evaluate
from toptune.tuning.apply import TuningArtifacts
from toptune.tuning.prefix import PrefixBank
from toptune.tuning.strategy import PREFIX, TuningStrategy


def main():
    parser = argparse.ArgumentParser(
        description="toptune CLI – parameter-efficient tuning experiments for task-oriented semantic parsing.",
        formatter_class=argparse.RawTextHelpFormatter
    )
    parser.add_argument('--version', action='version', version=f"v{PACKAGE_VERSION}", help="Show current version")
    parser.add_argument("--quiet", action="store_true", help="Only print errors and result tables.")

    subparsers = parser.add_subparsers(dest="command", help="The experiment step to run.")

    def add_config_args(sp):
        sp.add_argument("--config", default=None, help="Key/value experiment config file.")
        sp.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="Override a config key (repeatable).")

    def add_run_args(sp):
        sp.add_argument("--runs", default=RUNS_PATH, help="Root folder for run directories.")
        sp.add_argument("--name", default=None, help="Run directory name.")

    # generate
    generate_p = subparsers.add_parser("generate", help="Generate a synthetic corpus and its splits")
    generate_p.add_argument("--grammar", default=None, help="YAML grammar file (default: bundled food ordering).")
    generate_p.add_argument("--sizes", default="2000,300,300", help="train,dev,test sizes.")
    generate_p.add_argument("--seed", type=int, default=0)
    generate_p.add_argument("--spis", type=int, default=SPIS_DEFAULT, help="Also write an nSPIS training split (0 = skip).")
    generate_p.add_argument("--output", default=DATA_PATH, help="Folder for the TSV splits.")

    # convert
    convert_p = subparsers.add_parser("convert", help="Convert a TOP TSV file to TOP-Decoupled")
    convert_p.add_argument("source")
    convert_p.add_argument("destination")

    # train
    train_p = subparsers.add_parser("train", help="Train one strategy with one seed")
    add_config_args(train_p)
    add_run_args(train_p)

    # evaluate
    evaluate_p = subparsers.add_parser("evaluate", help="Score a trained run on a TSV split")
    add_config_args(evaluate_p)
    evaluate_p.add_argument("run", help="Run directory holding the checkpoint, tokenizer and model config.")
    evaluate_p.add_argument("data", help="TSV split to score.")

    # search
    search_p = subparsers.add_parser("search", help="Random search over trials and seeds")
    add_config_args(search_p)
    add_run_args(search_p)

    # sweep
    sweep_p = subparsers.add_parser("sweep", help="Prefix-length sweep with and without special tokens")
    add_config_args(sweep_p)
    add_run_args(sweep_p)
    sweep_p.add_argument("--lengths", default="1,5,10,30", help="Comma-separated prefix lengths.")
    sweep_p.add_argument("--seeds", type=int, default=SEARCH_SEEDS)
    sweep_p.add_argument("--variants", default=None,
                         help=f"Compare location/scope variants instead ({', '.join(PREFIX_VARIANTS)}).")

    # grid
    grid_p = subparsers.add_parser("grid", help="Reference strategies on the full and nSPIS splits, several seeds each")
    add_config_args(grid_p)
    add_run_args(grid_p)
    grid_p.add_argument("--seeds", type=int, default=GRID_SEEDS)
    grid_p.add_argument("--spis", type=int, default=SPIS_DEFAULT, help="Samples per intent and slot, low-data split.")

    # compare
    compare_p = subparsers.add_parser("compare", help="Full fine-tuning with and without label special tokens")
    add_config_args(compare_p)
    add_run_args(compare_p)
    compare_p.add_argument("--seeds", type=int, default=SEARCH_SEEDS)

    # budget
    budget_p = subparsers.add_parser("budget", help="Task-specific parameter counts per strategy")
    add_config_args(budget_p)
    add_run_args(budget_p)
    budget_p.add_argument("--labels", type=int, default=REMINDER_LABEL_COUNT, help="Number of special labels.")
    budget_p.add_argument("--toy", action="store_true", help="Use the model.* config instead of BART-Large dimensions.")

    # report
    report_p = subparsers.add_parser("report", help="Render report.md from a run directory")
    report_p.add_argument("run")

    # lengths
    lengths_p = subparsers.add_parser("lengths", help="Target length statistics with and without special tokens")
    add_config_args(lengths_p)
    add_run_args(lengths_p)

    args = parser.parse_args()
    Log.quiet = args.quiet

    if not args.command:
        parser.print_help()
        Log.error("Error: a subcommand is required")
        sys.exit(1)

    handlers = {
        'generate': run_generate,
        'convert': run_convert,
        'train': run_train,
        'evaluate': run_evaluate,
        'search': run_search,
        'sweep': run_sweep,
        'grid': run_grid,
        'compare': run_compare,
        'budget': run_budget,
        'report': run_report,
        'lengths': run_lengths,
    }

    try:
        handlers[args.command](args)
    except ToptuneError as e:
        Log.error(f"Error: {e}")
        sys.exit(1)


def _values(args):
    return load_key_values(args.config, args.overrides)


def _run_dir(args, command, values, default_name):
    return create_run_directory(args.runs, args.name or default_name, command, values,
                                [args.config] if args.config else [])


def run_generate(args):
    grammar = load_grammar(args.grammar) if args.grammar else default_grammar()
    try:
        sizes = tuple(int(size) for size in args.sizes.split(","))
    except ValueError:
        Log.error(f"Error: --sizes must be comma-separated integers, got '{args.sizes}'")
        sys.exit(1)
    corpus = generate(grammar, sum(sizes), args.seed)
    output = Path(args.output)
    names = ("train", "dev", "test")
    for name, split in zip(names, split_corpus(corpus, sizes, args.seed)):
        save_tsv(split, output / f"{name}.tsv")
        Log.created(str(output / f"{name}.tsv"))
        if name == "train" and args.spis:
            sample = spis_sample(split, SpisSpec(args.spis, args.seed))
            save_tsv(sample.examples, output / f"train_{args.spis}spis.tsv")
            Log.created(f"{output / f'train_{args.spis}spis.tsv'} ({len(sample.examples)} examples)")
    mean_depth = sum(tree_depth(example.tree) for example in corpus) / len(corpus)
    Log.detail(f"Mean tree depth {mean_depth:.2f}, expected {expected_depth(grammar):.2f}")


def run_convert(args):
    if not file_exists(args.source):
        sys.exit(1)
    convert_file(args.source, args.destination)


def run_train(args):
    values = _values(args)
    strategy = TuningStrategy.from_key_values(values)
    run_dir = _run_dir(args, "train", values, strategy.name)
    Log.run_start(run_dir.name)
    experiment = Experiment(values)
    record = experiment.run(strategy, experiment.train_config, experiment.train_config.seed, run_dir=run_dir)
    save_records([record], run_dir / RUN_RECORDS_FILE)
    for output in (RUN_RECORDS_FILE, CHECKPOINT_FILE, MODEL_CONFIG_FILE):
        if (run_dir / output).exists():
            record_output(run_dir, run_dir / output)
    Log.run_end(run_dir.name, str(run_dir))


def run_evaluate(args):
    if not folder_exists(args.run) or not file_exists(args.data):
        sys.exit(1)
    run_dir = Path(args.run)
    values = _values(args)
    strategy = TuningStrategy.from_key_values(values)
    config = ModelConfig.load(run_dir / MODEL_CONFIG_FILE)
    tokenizer = Tokenizer.load(run_dir)
    store = load_checkpoint(run_dir / CHECKPOINT_FILE, ParamStore(config.precision))
    bank = PrefixBank(strategy, config) if strategy.variant == PREFIX and strategy.length else None
    artifacts = TuningArtifacts(strategy, config, bank)
    examples = [example.decoupled() for example in load_tsv(args.data)]
    train_config = TrainConfig.from_key_values(values)
    result = evaluate(store, artifacts, tokenizer, examples, train_config.beam_size, train_config.max_target_length)
    Log.success(f"EM {result.em:.4f} ({result.matches}/{result.total}, {result.parse_failures} unparsable)")


def run_search(args):
    values = _values(args)
    strategy = TuningStrategy.from_key_values(values)
    space = SearchSpace.from_key_values(values, strategy.family)
    run_dir = _run_dir(args, "search", values, f"search-{strategy.name}")
    Log.run_start(run_dir.name)
    result = random_search(space, TrialRunner(values, strategy, run_dir))
    print_search_summary(result)
    save_records(result.records, run_dir / RUN_RECORDS_FILE)
    record_output(run_dir, run_dir / RUN_RECORDS_FILE)
    Log.run_end(run_dir.name, str(run_dir))


def run_sweep(args):
    values = _values(args)
    values.setdefault("strategy", PREFIX)
    base_strategy = TuningStrategy.from_key_values(values)
    lengths = [int(length) for length in args.lengths.split(",")]
    run_dir = _run_dir(args, "sweep", values, "sweep")
    Log.run_start(run_dir.name)
    experiment = Experiment(values)
    seeds = list(range(args.seeds))

    if args.variants:
        def variant_runner(variant, length, seed):
            strategy = base_strategy.with_values(length=length, **PREFIX_VARIANTS[variant])
            return experiment.run(strategy, experiment.train_config, seed)

        result = sweep_prefix_variants(args.variants.split(","), lengths, seeds, variant_runner)
    else:
        def runner(length, special, seed):
            strategy = base_strategy.with_values(length=length, special_tokens=special)
            return experiment.run(strategy, experiment.train_config, seed)

        result = sweep_prefix_length(lengths, seeds, runner)
    save_records(result.records, run_dir / RUN_RECORDS_FILE)
    for output in (write_sweep_tsv(result, run_dir / SWEEP_DATA_FILE),
                   render_sweep_svg(result, run_dir / SWEEP_PLOT_FILE),
                   run_dir / RUN_RECORDS_FILE):
        record_output(run_dir, output)
    Log.run_end(run_dir.name, str(run_dir))


def run_grid(args):
    values = _values(args)
    strategies = grid_strategies(values)
    run_dir = _run_dir(args, "grid", values, "grid")
    Log.run_start(run_dir.name)
    grid = ExperimentGrid(values, args.spis)
    result = train_grid(strategies, grid.splits, list(range(args.seeds)), grid)
    checks = result.checks(strategies[2].name, grid.splits[1])
    print_grid(result, checks)
    save_records([record for records in result.records.values() for record in records], run_dir / RUN_RECORDS_FILE)
    for output in (write_grid_tsv(result, run_dir / GRID_FILE), run_dir / RUN_RECORDS_FILE):
        record_output(run_dir, output)
    failed = [check.description for check in checks if not check.passed]
    if failed:
        Log.warning(f"Expected orderings not reached: {'; '.join(failed)}")
    Log.run_end(run_dir.name, str(run_dir))


def run_compare(args):
    values = _values(args)
    run_dir = _run_dir(args, "compare", values, "compare-special-ft")
    Log.run_start(run_dir.name)
    outcome = compare_special_ft(Experiment(values), list(range(args.seeds)))
    for name, scores in outcome.items():
        per_seed = ", ".join(f"{em:.4f}" for em in scores["test_em"])
        Log.info(f"{name:<4} test EM {per_seed}  mean {scores['mean_test_em']:.4f}")
    record_output(run_dir, write_comparison_tsv(outcome, run_dir / COMPARISON_FILE))
    Log.run_end(run_dir.name, str(run_dir))


def run_budget(args):
    values = _values(args)
    config = ModelConfig.from_key_values(values) if args.toy else None
    reports = budget_table(config=config, label_count=args.labels)
    print_budget_table(reports)
    if args.name:
        run_dir = _run_dir(args, "budget", values, args.name)
        record_output(run_dir, write_budget_tsv(reports, run_dir / BUDGET_FILE))


def run_report(args):
    if not folder_exists(args.run):
        sys.exit(1)
    path = render_report(args.run)
    record_output(args.run, path)
    Log.completed("Report", str(path))


def run_lengths(args):
    values = _values(args)
    splits = load_splits(values)
    examples = splits.train + splits.dev + splits.test
    tokenizer = Tokenizer.build([example.utterance for example in splits.train],
                                as_int(values.get("tokenizer.vocab_size", str(DEFAULT_VOCAB_SIZE)), "tokenizer.vocab_size"))
    table = length_table(examples, tokenizer)
    for variant in (WITHOUT, WITH):
        stats = table.rows[variant]
        Log.info(f"{variant:<24} max {stats.max:>4}  min {stats.min:>3}  mean {stats.mean:7.2f}  median {stats.median}")
    Log.success(f"Mean target length reduced by {table.reduction:.2f}%")
    if table.multi_token_labels:
        Log.warning(f"Labels still split into several tokens: {', '.join(table.multi_token_labels)}")
    if args.name:
        run_dir = _run_dir(args, "lengths", values, args.name)
        record_output(run_dir, write_lengths_tsv(table, run_dir / LENGTHS_FILE))


if __name__ == "__main__":
    main()
