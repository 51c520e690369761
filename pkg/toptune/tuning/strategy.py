from dataclasses import dataclass, replace
from typing import Dict

from toptune.config.base import PREFIX_BASE_DIM, PREFIX_LAYER_SCOPES, PREFIX_LOCATIONS, PREFIX_MID_DIM
from toptune.errors import ConfigError, StrategyError
from toptune.helpers.key_value import as_bool, as_int, section
from toptune.model.config import ModelConfig

FULL = "full"
PARTIAL = "partial"
PREFIX = "prefix"
BITFIT = "bitfit"
VARIANTS = (FULL, PARTIAL, PREFIX, BITFIT)

SPECIAL_MARK = "†"


@dataclass(frozen=True)
class TuningStrategy:
    """
    Immutable description of what trains. `special_tokens` adds trainable
    label embeddings; with `full` it gives the †FT variant.
    """
    variant: str
    top_k: int = 2
    length: int = 30
    location: str = "prefix"
    layer_scope: str = "all"
    mid_dim: int = PREFIX_MID_DIM
    base_dim: int = PREFIX_BASE_DIM
    special_tokens: bool = False

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise StrategyError(f"unknown strategy '{self.variant}', expected one of {', '.join(VARIANTS)}")
        if self.variant == PREFIX:
            if self.length < 0:
                raise StrategyError(f"prefix length must be >= 0, got {self.length}")
            if self.mid_dim < 1 or self.base_dim < 1:
                raise StrategyError("prefix mid_dim and base_dim must be >= 1")
            if self.location not in PREFIX_LOCATIONS:
                raise StrategyError(f"unknown prefix location '{self.location}'")
            if self.layer_scope not in PREFIX_LAYER_SCOPES:
                raise StrategyError(f"unknown prefix layer scope '{self.layer_scope}'")
        if self.variant == PARTIAL and self.top_k < 1:
            raise StrategyError(f"partial fine-tuning needs top_k >= 1, got {self.top_k}")
        if self.variant in (PARTIAL, BITFIT) and self.special_tokens:
            raise StrategyError(f"special tokens are not combined with '{self.variant}'")

    @classmethod
    def full(cls, special_tokens: bool = False) -> "TuningStrategy":
        return cls(FULL, special_tokens=special_tokens)

    @classmethod
    def partial(cls, top_k: int = 2) -> "TuningStrategy":
        return cls(PARTIAL, top_k=top_k)

    @classmethod
    def prefix(cls, length: int = 30, location: str = "prefix", layer_scope: str = "all",
               mid_dim: int = PREFIX_MID_DIM, special_tokens: bool = False) -> "TuningStrategy":
        return cls(PREFIX, length=length, location=location, layer_scope=layer_scope, mid_dim=mid_dim,
                   special_tokens=special_tokens)

    @classmethod
    def bitfit(cls) -> "TuningStrategy":
        return cls(BITFIT)

    @property
    def name(self) -> str:
        mark = SPECIAL_MARK if self.special_tokens else ""
        if self.variant == FULL:
            return f"{mark}FT"
        if self.variant == PARTIAL:
            return f"FT-Top{self.top_k}"
        if self.variant == PREFIX:
            return f"{mark}Prefix{self.length}"
        return "BitFit"

    @property
    def family(self) -> str:
        """Search family: prefix strategies sample prefix dimensions, the others do not."""
        return PREFIX if self.variant == PREFIX else "other"

    def with_values(self, **changes) -> "TuningStrategy":
        return replace(self, **changes)

    def check(self, config: ModelConfig) -> None:
        """Raises StrategyError when the strategy cannot be applied to `config`."""
        if self.variant == PARTIAL and self.top_k > config.decoder_layers:
            raise StrategyError(f"top_k {self.top_k} exceeds {config.decoder_layers} decoder layers")
        if self.variant == PREFIX and self.layer_scope == "top2_decoder" and config.decoder_layers < 2:
            raise StrategyError("top2_decoder scope needs at least 2 decoder layers")

    @classmethod
    def from_key_values(cls, values: Dict[str, str]) -> "TuningStrategy":
        """
        Reads `strategy`, `special_tokens`, `partial.top_k` and `prefix.*`
        (`length`, `location`, `layer_scope`, `mid_dim`, `base_dim`, `special_tokens`).
        """
        if "strategy" not in values:
            raise ConfigError("missing 'strategy' key")
        fields = {"variant": values["strategy"].strip().lower()}
        special = values.get("special_tokens")
        prefix = section(values, "prefix")
        if "special_tokens" in prefix:
            special = prefix.pop("special_tokens")
        if special is not None:
            fields["special_tokens"] = as_bool(special, "special_tokens")
        partial = section(values, "partial")
        if "top_k" in partial:
            fields["top_k"] = as_int(partial["top_k"], "partial.top_k")
        for key, value in prefix.items():
            if key in ("length", "mid_dim", "base_dim"):
                fields[key] = as_int(value, f"prefix.{key}")
            elif key in ("location", "layer_scope"):
                fields[key] = value
            else:
                raise ConfigError(f"unknown prefix key 'prefix.{key}'")
        return cls(**fields)

    def to_key_values(self) -> Dict[str, object]:
        values: Dict[str, object] = {"strategy": self.variant, "special_tokens": self.special_tokens}
        if self.variant == PARTIAL:
            values["partial.top_k"] = self.top_k
        if self.variant == PREFIX:
            values.update({
                "prefix.length": self.length,
                "prefix.location": self.location,
                "prefix.layer_scope": self.layer_scope,
                "prefix.mid_dim": self.mid_dim,
                "prefix.base_dim": self.base_dim,
            })
        return values
