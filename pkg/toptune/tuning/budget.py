from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from typing import List, Optional

import numpy as np

from toptune.config.base import BART_LARGE_TOTAL_PARAMETERS
from toptune.model.config import ModelConfig
from toptune.model.transformer import parameter_shapes
from toptune.tuning.apply import is_bitfit_bias, model_trainable_names
from toptune.tuning.prefix import PrefixBank
from toptune.tuning.strategy import BITFIT, FULL, PREFIX, TuningStrategy


def prefix_budget(length: int, layers: int, hid_dim: int) -> int:
    """Key and value rows at three attention types per layer."""
    return length * layers * hid_dim * 2 * 3


def special_budget(label_count: int, emb_dim: int) -> int:
    return label_count * emb_dim


def percent(part: int, total: int) -> Decimal:
    """part / total as a percentage, two decimals, half-up."""
    if total <= 0:
        return Decimal("0.00")
    return (Decimal(part) * 100 / Decimal(total)).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP)


@dataclass
class BudgetReport:
    strategy: str
    formula_count: Optional[int]
    materialized_count: int
    trainable_count: int
    total_count: int
    notes: List[str] = field(default_factory=list)
    bitfit_inventory: List[str] = field(default_factory=list)

    @property
    def percent(self) -> Decimal:
        """Task-specific parameters kept after training, relative to the PLM total."""
        return percent(self.materialized_count, self.total_count)

    @property
    def diverges(self) -> bool:
        return self.formula_count is not None and self.formula_count != self.materialized_count


def _scoped_layers(strategy: TuningStrategy, config: ModelConfig) -> int:
    return 2 if strategy.layer_scope == "top2_decoder" else config.encoder_layers


def budget_report(strategy: TuningStrategy, config: ModelConfig, label_count: int = 0,
                  total: Optional[int] = None) -> BudgetReport:
    """
    Counts from shapes alone, so BART-Large dimensions cost nothing. For
    prefix strategies the formula count is compared with what the bank
    actually materializes and any difference is itemized in `notes`.
    """
    shapes = parameter_shapes(config)
    sizes = {name: int(np.prod(shape)) for name, shape in shapes.items()}
    model_total = sum(sizes.values())
    total = model_total if total is None else total
    emb_dim = config.emb_dim
    specials = special_budget(label_count, emb_dim) if strategy.special_tokens else 0
    notes: List[str] = []
    inventory: List[str] = []

    if strategy.variant == PREFIX:
        bank = PrefixBank(strategy, config)
        formula = prefix_budget(strategy.length, _scoped_layers(strategy, config), config.hid_dim) + specials
        materialized = (bank.materialized_count() if strategy.length else 0) + specials
        trainable = (bank.parameter_count() if strategy.length else 0) + specials
        if formula != materialized:
            notes.append(f"formula assumes {_scoped_layers(strategy, config)} layers x 3 attention types, "
                         f"bank materializes {len(bank.sites)} sites: {formula - specials:,} vs "
                         f"{materialized - specials:,}")
        if strategy.length:
            notes.append(f"training-time bank parameters (base + mid_dim {strategy.mid_dim} network): "
                         f"{bank.parameter_count():,}")
    else:
        names = model_trainable_names(strategy, config, shapes)
        formula = None
        materialized = sum(sizes[name] for name in names)
        if strategy.variant == FULL:
            materialized = total + specials
        trainable = materialized
        if strategy.variant == BITFIT:
            inventory = [name for name in names if is_bitfit_bias(name)]
    return BudgetReport(strategy.name, formula, materialized, trainable, total, notes, inventory)


def bart_large_report(strategy: TuningStrategy, label_count: int = 0) -> BudgetReport:
    """Budget at the reference PLM's dimensions against its published total."""
    config = ModelConfig.bart_large()
    return budget_report(strategy, config, label_count, BART_LARGE_TOTAL_PARAMETERS)
