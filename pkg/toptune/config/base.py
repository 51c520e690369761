RUNS_PATH = "./runs"
DATA_PATH = "./data"

# Files inside a run directory
MANIFEST_FILE = "manifest.yaml"
TRAIN_LOG_FILE = "train_log.jsonl"
RUN_RECORDS_FILE = "run_records.jsonl"
CHECKPOINT_FILE = "best.ckpt"
VOCAB_FILE = "vocab.tsv"
MERGES_FILE = "merges.tsv"
MODEL_CONFIG_FILE = "model.conf"
REPORT_FILE = "report.md"
SWEEP_DATA_FILE = "sweep.tsv"
SWEEP_PLOT_FILE = "sweep.svg"
BUDGET_FILE = "budget.tsv"
LENGTHS_FILE = "lengths.tsv"
GRID_FILE = "grid.tsv"
COMPARISON_FILE = "special_ft.tsv"

WORKERS_ENV = "TOPTUNE_WORKERS"

# Checkpoint format
CHECKPOINT_MAGIC = b"TTCK"
CHECKPOINT_VERSION = 1
CHECKPOINT_DTYPES = {0: "<f4", 1: "<f8", 2: "|b1"}

# Numeric precision
PRECISIONS = {"float32": "float32", "float64": "float64"}
DEFAULT_PRECISION = "float32"
VERIFY_PRECISION = "float64"

# Optimizer
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

# Fixed hyperparameters of every experiment
BEAM_SIZE = 6
MAX_EPOCHS = 50
EARLY_STOPPING_PATIENCE = 4
MAX_TARGET_LENGTH = 200
GRADIENT_ACCUMULATION_STEPS = 3
EVALUATION_FREQUENCY = 1
LOW_DATA_DUPLICATION_TARGET = 20000

# Toy model
TOY_ENCODER_LAYERS = 2
TOY_DECODER_LAYERS = 2
TOY_HEADS = 4
TOY_HID_DIM = 64
TOY_FFN_DIM = 256
TOY_MAX_POSITIONS = 256
INIT_STD = 0.02
LAYER_NORM_EPS = 1e-5
MASK_VALUE = -1e9

# Prefix bank
PREFIX_BASE_DIM = 512
PREFIX_MID_DIM = 600
PREFIX_INIT_STD = 0.02
PREFIX_LOCATIONS = ("prefix", "suffix", "prefix_and_suffix")
PREFIX_LAYER_SCOPES = ("all", "top2_decoder")

# Reference PLM used for parameter accounting (BART-Large)
BART_LARGE_LAYERS = 12
BART_LARGE_HID_DIM = 1024
BART_LARGE_TOTAL_PARAMETERS = 406_291_456
BART_LARGE_FT_TOP2_PARAMETERS = 33_629_273
BART_LARGE_BITFIT_PARAMETERS = 320_399
REMINDER_LABEL_COUNT = 51

# Tokenizer
PAD_TOKEN = "<pad>"
BOS_TOKEN = "<s>"
EOS_TOKEN = "</s>"
UNK_TOKEN = "<unk>"
RESERVED_TOKENS = (PAD_TOKEN, BOS_TOKEN, EOS_TOKEN, UNK_TOKEN)
END_OF_WORD = "</w>"
DEFAULT_VOCAB_SIZE = 1000
SEED_TEXT = (
    "the quick brown fox jumps over the lazy dog . "
    "please send me a reminder about the order when it arrives , thanks ! "
    "what is the weather like in the city today ? "
    "ABCDEFGHIJKLMNOPQRSTUVWXYZ abcdefghijklmnopqrstuvwxyz 0123456789 "
    "[ ] : _ ' - , . ? ! & / ( )"
)

# TOP format
INTENT_PREFIX = "IN:"
SLOT_PREFIX = "SL:"
LABEL_PATTERN = r"^(IN|SL):[A-Z0-9_]+$"

# Data generation
SPIS_DEFAULT = 10
DEFAULT_SPLIT_SIZES = (2000, 300, 300)
DEFAULT_GRAMMAR_FILE = "food_ordering.yaml"

# Strategy grid: every reference strategy on the full split and an SPIS sample
GRID_SEEDS = 3
GRID_FT_EM_FLOOR = 0.90

# Search spaces
SEARCH_TRIALS = 16
SEARCH_SEEDS = 3
SEARCH_LR_RANGE = (5e-6, 5e-4)
SEARCH_BATCH_SIZES = (4, 8, 16)
SEARCH_PREFIX_LENGTHS = (20, 30, 50, 100)
SEARCH_MID_DIMS = (300, 600, 800)

# (lr, bsz, prefix_length, mid_dim) per trial for prefix tuning
PREFIX_TRIALS = [
    (3.19e-05, 16, 50, 800),
    (1.13e-04, 4, 50, 300),
    (3.00e-04, 8, 100, 800),
    (4.62e-05, 16, 30, 600),
    (4.27e-04, 4, 50, 300),
    (1.79e-05, 16, 30, 300),
    (5.89e-05, 4, 50, 800),
    (3.88e-05, 16, 20, 600),
    (5.93e-06, 16, 30, 300),
    (6.23e-05, 16, 100, 300),
    (5.81e-06, 8, 100, 600),
    (1.25e-04, 4, 50, 800),
    (2.64e-05, 16, 20, 600),
    (3.98e-05, 4, 20, 300),
    (1.25e-05, 4, 100, 800),
    (3.70e-05, 16, 20, 300),
]

# (lr, bsz) per trial for full fine-tuning, partial fine-tuning and BitFit
OTHER_TRIALS = [
    (1.61e-04, 4),
    (7.34e-05, 16),
    (2.52e-04, 4),
    (1.22e-04, 4),
    (1.49e-05, 8),
    (3.69e-04, 8),
    (5.82e-05, 4),
    (1.50e-05, 8),
    (4.07e-05, 16),
    (1.40e-05, 16),
    (5.40e-06, 16),
    (1.50e-05, 8),
    (9.82e-05, 4),
    (7.07e-05, 4),
    (1.42e-04, 8),
    (4.38e-05, 4),
]

COLORS = {
    "INFO": "\033[38;5;39m",
    "SUCCESS": "\033[38;5;35m",
    "WARNING": "\033[38;5;178m",
    "ERROR": "\033[38;5;203m",
    "RESET": "\033[0m",
    "GRAY": "\033[38;5;244m"
}
