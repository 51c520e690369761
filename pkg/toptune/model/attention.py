import math
from dataclasses import dataclass, field
from typing import Dict, NamedTuple, Optional, Tuple

import numpy as np

from toptune.config.base import MASK_VALUE
from toptune.errors import ModelError
from toptune.numeric import tensor as T
from toptune.numeric.tensor import Tensor

ENCODER_SELF = "encoder_self"
DECODER_SELF = "decoder_self"
CROSS = "cross"
SITE_KINDS = (ENCODER_SELF, DECODER_SELF, CROSS)


class Site(NamedTuple):
    kind: str
    layer: int

    def __str__(self):
        return f"{self.kind}.{self.layer}"


KeyValue = Tuple[Tensor, Tensor]


@dataclass
class SiteBlock:
    """Key/value rows prepended (prefix) or appended (suffix) at one attention site."""
    prefix: Optional[KeyValue] = None
    suffix: Optional[KeyValue] = None

    def __post_init__(self):
        for name, block in (("prefix", self.prefix), ("suffix", self.suffix)):
            if block is not None and block[0].shape != block[1].shape:
                raise ModelError(f"{name} key {block[0].shape} and value {block[1].shape} blocks differ")

    @property
    def prefix_length(self) -> int:
        return 0 if self.prefix is None else self.prefix[0].shape[0]

    @property
    def suffix_length(self) -> int:
        return 0 if self.suffix is None else self.suffix[0].shape[0]


@dataclass
class PrefixInjection:
    blocks: Dict[Site, SiteBlock] = field(default_factory=dict)

    @classmethod
    def empty(cls) -> "PrefixInjection":
        return cls()

    def get(self, site: Site) -> Optional[SiteBlock]:
        return self.blocks.get(site)

    def sites(self):
        return sorted(self.blocks, key=lambda site: (SITE_KINDS.index(site.kind), site.layer))

    def allocated(self) -> int:
        """Number of key/value values held across all sites."""
        total = 0
        for block in self.blocks.values():
            for kv in (block.prefix, block.suffix):
                if kv is not None:
                    total += kv[0].data.size + kv[1].data.size
        return total


def _split_heads(x: Tensor, heads: int) -> Tensor:
    b, t, d = x.shape
    return x.reshape(b, t, heads, d // heads).transpose(0, 2, 1, 3)


def _expand(block: Tensor, batch: int) -> Tensor:
    length, dim = block.shape
    return T.broadcast_to(block.reshape(1, length, dim), (batch, length, dim))


def attention_mask(batch: int, queries: int, keys: int, prefix: int, suffix: int,
                   key_mask: Optional[np.ndarray], causal: bool, dtype) -> Optional[np.ndarray]:
    """
    Additive mask of shape (B, 1, Tq, prefix + Tk + suffix). Prefix and suffix
    columns are always visible; causal masking and key padding apply to real keys.
    """
    if key_mask is None and not causal:
        return None
    real = np.zeros((batch, queries, keys), dtype=bool)
    if key_mask is not None:
        real |= ~np.asarray(key_mask, dtype=bool)[:, None, :]
    if causal:
        real |= np.triu(np.ones((queries, keys), dtype=bool), k=1)[None, :, :]
    blocked = np.concatenate([
        np.zeros((batch, queries, prefix), dtype=bool),
        real,
        np.zeros((batch, queries, suffix), dtype=bool),
    ], axis=2)
    if not blocked.any():
        return None
    return np.where(blocked, MASK_VALUE, 0.0).astype(dtype)[:, None, :, :]


def attend_with_prefix(queries: Tensor, keys: Tensor, values: Tensor,
                       prefix: Optional[KeyValue] = None, suffix: Optional[KeyValue] = None,
                       causal: bool = False, heads: int = 1, key_mask: Optional[np.ndarray] = None,
                       return_weights: bool = False):
    """
    softmax(Q [Pk; K; Sk]^T / sqrt(d)) [Pv; V; Sv] per head, for already projected
    (B, T, D) queries/keys/values and (L, D) prefix/suffix blocks.
    """
    if suffix is not None and suffix[0].shape[0] and causal:
        raise ModelError("suffix blocks are not allowed at a causal attention site")
    batch, query_len, dim = queries.shape
    if keys.shape != values.shape or keys.shape[0] != batch or keys.shape[2] != dim:
        raise ModelError(f"inconsistent attention shapes: q {queries.shape}, k {keys.shape}, v {values.shape}")
    if dim % heads:
        raise ModelError(f"width {dim} is not divisible by {heads} heads")

    prefix_len = 0 if prefix is None else prefix[0].shape[0]
    suffix_len = 0 if suffix is None else suffix[0].shape[0]
    for block in (prefix, suffix):
        if block is not None and (block[0].ndim != 2 or block[0].shape[1] != dim):
            raise ModelError(f"prefix/suffix blocks must be (L, {dim}), got {block[0].shape}")

    if prefix_len or suffix_len:
        key_parts, value_parts = [], []
        if prefix_len:
            key_parts.append(_expand(prefix[0], batch))
            value_parts.append(_expand(prefix[1], batch))
        key_parts.append(keys)
        value_parts.append(values)
        if suffix_len:
            key_parts.append(_expand(suffix[0], batch))
            value_parts.append(_expand(suffix[1], batch))
        keys = T.concat(key_parts, axis=1)
        values = T.concat(value_parts, axis=1)

    head_dim = dim // heads
    q = _split_heads(queries, heads)
    k = _split_heads(keys, heads)
    v = _split_heads(values, heads)
    scores = (q @ k.transpose(0, 1, 3, 2)) * (1.0 / math.sqrt(head_dim))
    mask = attention_mask(batch, query_len, keys.shape[1] - prefix_len - suffix_len, prefix_len, suffix_len,
                          key_mask, causal, scores.dtype)
    if mask is not None:
        scores = scores + mask
    weights = T.softmax(scores, axis=-1)
    out = (weights @ v).transpose(0, 2, 1, 3).reshape(batch, query_len, dim)
    if return_weights:
        return out, weights.data
    return out
