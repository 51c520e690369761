from .strategy import BITFIT, FULL, PARTIAL, PREFIX, VARIANTS, TuningStrategy
from .prefix import PrefixBank, scope_layers, split_prefix
from .special import SpecialEmbeddings, expand_embeddings
from .apply import TuningArtifacts, apply_strategy, audit_frozen, is_bitfit_bias, model_trainable_names
from .budget import BudgetReport, bart_large_report, budget_report, percent, prefix_budget, special_budget
