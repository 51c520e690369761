"""
Prefix bank: a small base matrix reparameterized by a two-layer tanh network
into key/value blocks for every injected attention site.
"""

import math
from typing import Dict, List, Tuple

import numpy as np

from toptune.config.base import INIT_STD, PREFIX_INIT_STD
from toptune.errors import StrategyError
from toptune.model.attention import CROSS, DECODER_SELF, ENCODER_SELF, PrefixInjection, Site, SiteBlock
from toptune.model.config import ModelConfig
from toptune.numeric import tensor as T
from toptune.numeric.params import ParamStore
from toptune.numeric.tensor import Tensor, name_scope
from toptune.tuning.strategy import PREFIX, TuningStrategy

BANK_PREFIX = "prefix."
BANK_BASE = "prefix.base"
BANK_FC1 = "prefix.fc1"
BANK_FC2 = "prefix.fc2"


def split_prefix(length: int) -> Tuple[int, int]:
    """Even split between prefix and suffix rows, rounding up on the prefix side."""
    if length < 0:
        raise StrategyError(f"length must be >= 0, got {length}")
    return math.ceil(length / 2), length // 2


def scope_layers(strategy: TuningStrategy, config: ModelConfig) -> List[Site]:
    """Attention sites that receive injected blocks, in (kind, layer) order."""
    if strategy.variant != PREFIX:
        return []
    strategy.check(config)
    if strategy.layer_scope == "top2_decoder":
        layers = range(config.decoder_layers - 2, config.decoder_layers)
        return [Site(DECODER_SELF, i) for i in layers] + [Site(CROSS, i) for i in layers]
    return ([Site(ENCODER_SELF, i) for i in range(config.encoder_layers)]
            + [Site(DECODER_SELF, i) for i in range(config.decoder_layers)]
            + [Site(CROSS, i) for i in range(config.decoder_layers)])


class PrefixBank:
    """
    Parameters live in the shared store under `prefix.*` so one optimizer and
    one checkpoint cover them; none of them is a model parameter.
    """

    def __init__(self, strategy: TuningStrategy, config: ModelConfig):
        self.strategy = strategy
        self.config = config
        self.sites = scope_layers(strategy, config)

    @property
    def length(self) -> int:
        return self.strategy.length

    @property
    def output_dim(self) -> int:
        return len(self.sites) * 2 * self.config.hid_dim

    def shapes(self) -> Dict[str, Tuple[int, ...]]:
        s = self.strategy
        return {
            BANK_BASE: (s.length, s.base_dim),
            f"{BANK_FC1}.weight": (s.base_dim, s.mid_dim),
            f"{BANK_FC1}.bias": (s.mid_dim,),
            f"{BANK_FC2}.weight": (s.mid_dim, self.output_dim),
            f"{BANK_FC2}.bias": (self.output_dim,),
        }

    def parameter_count(self) -> int:
        return int(sum(np.prod(shape) for shape in self.shapes().values()))

    def materialized_count(self) -> int:
        """Values held by the key/value blocks the network produces."""
        return self.length * self.output_dim

    def install(self, store: ParamStore, seed: int = 0) -> None:
        rng = np.random.default_rng(seed)
        for name, shape in self.shapes().items():
            if name.endswith(".bias"):
                value = np.zeros(shape)
            else:
                std = PREFIX_INIT_STD if name == BANK_BASE else INIT_STD
                value = rng.normal(0.0, std, size=shape)
            store.add(name, value, trainable=True)

    def _split(self, site: Site, key: Tensor, value: Tensor) -> SiteBlock:
        if site.kind != ENCODER_SELF or self.strategy.location == "prefix":
            return SiteBlock(prefix=(key, value))
        if self.strategy.location == "suffix":
            return SiteBlock(suffix=(key, value))
        head, tail = split_prefix(self.length)
        return SiteBlock(prefix=(key[:head], value[:head]), suffix=(key[head:], value[head:]))

    def materialize(self, params: Dict[str, Tensor]) -> PrefixInjection:
        """Regenerates every site's key/value blocks from the bound bank parameters."""
        if self.length == 0 or not self.sites:
            return PrefixInjection.empty()
        with name_scope("prefix"):
            hidden = T.tanh(params[BANK_BASE] @ params[f"{BANK_FC1}.weight"] + params[f"{BANK_FC1}.bias"])
            out = hidden @ params[f"{BANK_FC2}.weight"] + params[f"{BANK_FC2}.bias"]
            out = out.reshape(self.length, len(self.sites), 2, self.config.hid_dim)
            blocks = {site: self._split(site, out[:, index, 0, :], out[:, index, 1, :])
                      for index, site in enumerate(self.sites)}
        return PrefixInjection(blocks)

    def cache(self, store: ParamStore) -> PrefixInjection:
        """Blocks computed once from the stored values, for inference after training."""
        with T.no_grad():
            params = {name: Tensor(store[name]) for name in self.shapes()}
            return self.materialize(params)
