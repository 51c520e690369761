from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Dict, Union

from toptune.config.base import (BART_LARGE_HID_DIM, BART_LARGE_LAYERS, DEFAULT_PRECISION, PRECISIONS,
                                 TOY_DECODER_LAYERS, TOY_ENCODER_LAYERS, TOY_FFN_DIM, TOY_HEADS, TOY_HID_DIM,
                                 TOY_MAX_POSITIONS)
from toptune.errors import ConfigError
from toptune.helpers.key_value import as_int, dump_key_values, load_key_values, section


@dataclass(frozen=True)
class ModelConfig:
    encoder_layers: int = TOY_ENCODER_LAYERS
    decoder_layers: int = TOY_DECODER_LAYERS
    heads: int = TOY_HEADS
    hid_dim: int = TOY_HID_DIM
    ffn_dim: int = TOY_FFN_DIM
    vocab_size: int = 1000
    max_positions: int = TOY_MAX_POSITIONS
    precision: str = DEFAULT_PRECISION

    def __post_init__(self):
        if self.heads < 1 or self.hid_dim % self.heads:
            raise ConfigError(f"hid_dim {self.hid_dim} must be divisible by heads {self.heads}")
        if min(self.encoder_layers, self.decoder_layers, self.vocab_size, self.max_positions, self.ffn_dim) < 1:
            raise ConfigError("layer counts, vocab_size, ffn_dim and max_positions must be positive")
        if self.precision not in PRECISIONS:
            raise ConfigError(f"precision must be one of {sorted(PRECISIONS)}, got '{self.precision}'")

    @property
    def emb_dim(self) -> int:
        return self.hid_dim

    @property
    def head_dim(self) -> int:
        return self.hid_dim // self.heads

    def with_vocab_size(self, vocab_size: int) -> "ModelConfig":
        return replace(self, vocab_size=vocab_size)

    def with_precision(self, precision: str) -> "ModelConfig":
        return replace(self, precision=precision)

    @classmethod
    def bart_large(cls) -> "ModelConfig":
        """Shape of the reference PLM, used only for parameter accounting."""
        return cls(encoder_layers=BART_LARGE_LAYERS, decoder_layers=BART_LARGE_LAYERS, heads=16,
                   hid_dim=BART_LARGE_HID_DIM, ffn_dim=4096, vocab_size=50265, max_positions=1026)

    @classmethod
    def from_key_values(cls, values: Dict[str, str], base: "ModelConfig" = None) -> "ModelConfig":
        """Reads `model.*` keys; unknown keys are rejected."""
        base = base or cls()
        fields = section(values, "model")
        updates = {}
        for key, value in fields.items():
            if key == "precision":
                updates[key] = value
            elif key in asdict(base):
                updates[key] = as_int(value, f"model.{key}")
            else:
                raise ConfigError(f"unknown model key 'model.{key}'")
        return replace(base, **updates)

    def to_key_values(self) -> Dict[str, object]:
        return {f"model.{key}": value for key, value in asdict(self).items()}

    def save(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(dump_key_values(self.to_key_values()), encoding="utf-8")
        return path

    @classmethod
    def load(cls, path: Union[str, Path]) -> "ModelConfig":
        return cls.from_key_values(load_key_values(path))
