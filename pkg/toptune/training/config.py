from dataclasses import asdict, dataclass, fields, replace
from typing import Dict

from toptune.config.base import (BEAM_SIZE, EARLY_STOPPING_PATIENCE, EVALUATION_FREQUENCY, GRADIENT_ACCUMULATION_STEPS,
                                 LOW_DATA_DUPLICATION_TARGET, MAX_EPOCHS, MAX_TARGET_LENGTH)
from toptune.errors import ConfigError
from toptune.helpers.key_value import as_float, as_int, section


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-4
    batch_size: int = 8
    gradient_accumulation_steps: int = GRADIENT_ACCUMULATION_STEPS
    max_epochs: int = MAX_EPOCHS
    early_stopping_patience: int = EARLY_STOPPING_PATIENCE
    beam_size: int = BEAM_SIZE
    max_target_length: int = MAX_TARGET_LENGTH
    seed: int = 0
    evaluation_frequency: int = EVALUATION_FREQUENCY
    low_data_duplication_target: int = LOW_DATA_DUPLICATION_TARGET
    warm_start_epochs: int = 0

    def __post_init__(self):
        if self.lr <= 0:
            raise ConfigError(f"train.lr must be positive, got {self.lr}")
        for name in ("batch_size", "gradient_accumulation_steps", "max_epochs", "beam_size",
                     "max_target_length", "evaluation_frequency"):
            if getattr(self, name) < 1:
                raise ConfigError(f"train.{name} must be >= 1, got {getattr(self, name)}")
        if self.early_stopping_patience < 1:
            raise ConfigError("train.early_stopping_patience must be >= 1")

    @property
    def examples_per_update(self) -> int:
        return self.batch_size * self.gradient_accumulation_steps

    def with_values(self, **changes) -> "TrainConfig":
        return replace(self, **changes)

    @classmethod
    def from_key_values(cls, values: Dict[str, str], base: "TrainConfig" = None) -> "TrainConfig":
        base = base or cls()
        known = {f.name for f in fields(cls)}
        updates = {}
        for key, value in section(values, "train").items():
            if key not in known:
                raise ConfigError(f"unknown training key 'train.{key}'")
            updates[key] = as_float(value, f"train.{key}") if key == "lr" else as_int(value, f"train.{key}")
        return replace(base, **updates)

    def to_key_values(self) -> Dict[str, object]:
        return {f"train.{key}": value for key, value in asdict(self).items()}
