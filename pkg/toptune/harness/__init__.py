from .search import RunRecord, SearchResult, SearchSpace, Trial, load_records, random_search, save_records
from .sweep import SweepResult, SweepRow, render_sweep_svg, sweep_prefix_length, write_sweep_tsv
from .budget_table import budget_table, print_budget_table, reference_strategies, write_budget_tsv
from .lengths import LengthTable, length_table, write_lengths_tsv
from .report import render_report, summarize_records
from .experiment import DataSplits, Experiment, TrialRunner, compare_special_ft, load_splits
