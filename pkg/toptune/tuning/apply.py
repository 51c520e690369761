import re
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional

import numpy as np

from toptune.errors import StrategyError
from toptune.model.attention import PrefixInjection
from toptune.model.config import ModelConfig
from toptune.model.transformer import parameter_shapes
from toptune.numeric.params import ParamStore
from toptune.numeric.tensor import Tensor
from toptune.tokenizer.tokenizer import Tokenizer
from toptune.tuning.prefix import BANK_PREFIX, PrefixBank
from toptune.tuning.special import EMBEDDINGS, SpecialEmbeddings, expand_embeddings
from toptune.tuning.strategy import BITFIT, FULL, PARTIAL, PREFIX, TuningStrategy

_BITFIT_RE = re.compile(
    r"\.(self_attn|cross_attn)\.[qkv]\.bias$"
    r"|norm\.bias$"
    r"|\.ffn\.fc[12]\.bias$"
)


def is_bitfit_bias(name: str) -> bool:
    """Query/key/value projection biases of every attention block, layer-norm biases and feed-forward biases."""
    return bool(_BITFIT_RE.search(name))


def model_trainable_names(strategy: TuningStrategy, config: ModelConfig, names: Iterable[str]) -> List[str]:
    """Model parameters (not bank entries) that train fully under `strategy`."""
    names = list(names)
    if strategy.variant == FULL:
        return names
    if strategy.variant == PARTIAL:
        top = range(config.decoder_layers - strategy.top_k, config.decoder_layers)
        heads = tuple(f"decoder.{i}." for i in top)
        return [name for name in names if name.startswith(heads)]
    if strategy.variant == BITFIT:
        return [name for name in names if is_bitfit_bias(name)]
    return []


@dataclass
class TuningArtifacts:
    """What `apply_strategy` leaves behind besides the masks on the store."""
    strategy: TuningStrategy
    config: ModelConfig
    bank: Optional[PrefixBank] = None
    special: Optional[SpecialEmbeddings] = None

    def injection(self, params: Dict[str, Tensor]) -> PrefixInjection:
        if self.bank is None:
            return PrefixInjection.empty()
        return self.bank.materialize(params)

    def cached_injection(self, store: ParamStore) -> PrefixInjection:
        if self.bank is None:
            return PrefixInjection.empty()
        return self.bank.cache(store)


def apply_strategy(strategy: TuningStrategy, config: ModelConfig, store: ParamStore,
                   tokenizer: Optional[Tokenizer] = None, seed: int = 0) -> TuningArtifacts:
    """
    Sets trainable flags and row masks on `store`, installs a prefix bank for
    prefix strategies and widens the embeddings when special tokens are on.
    The returned config carries the widened vocabulary.
    """
    strategy.check(config)
    special = None
    if strategy.special_tokens:
        if tokenizer is None or not tokenizer.has_specials:
            raise StrategyError(f"{strategy.name} needs a tokenizer with special labels")
        config, special = expand_embeddings(store, tokenizer, config)
    elif store[EMBEDDINGS].shape[0] != config.vocab_size:
        raise StrategyError(f"embedding table has {store[EMBEDDINGS].shape[0]} rows, config expects {config.vocab_size}")

    model_names = list(parameter_shapes(config))
    missing = [name for name in model_names if name not in store]
    if missing:
        raise StrategyError(f"parameter store lacks {len(missing)} model entries, e.g. '{missing[0]}'")
    for name in [name for name in store if name.startswith(BANK_PREFIX)]:
        store.remove(name)
    store.freeze_all()
    for name in model_trainable_names(strategy, config, model_names):
        store.set_trainable(name, True)
    if special is not None and strategy.variant != FULL:
        store.set_row_mask(EMBEDDINGS, special.row_mask(config.vocab_size))

    bank = None
    if strategy.variant == PREFIX and strategy.length > 0:
        bank = PrefixBank(strategy, config)
        bank.install(store, seed)
    return TuningArtifacts(strategy, config, bank, special)


def audit_frozen(store: ParamStore, reference: Dict[str, np.ndarray]) -> List[str]:
    """
    Names whose frozen part differs bitwise from `reference`. For a row-masked
    matrix only rows outside the mask count as frozen.
    """
    violations = []
    for name, before in reference.items():
        if name not in store or store.trainable_mask[name]:
            continue
        after = store[name]
        if after.shape != before.shape:
            violations.append(name)
            continue
        mask = store.row_mask[name]
        frozen = slice(None) if mask is None else ~mask
        if not np.array_equal(after[frozen], before[frozen]):
            violations.append(name)
    return violations
