"""
A miniature BART-shaped encoder-decoder: shared token embeddings tied to the
output projection, learned positions, pre-layer-norm blocks with GELU
feed-forward layers, and a final layer norm on each stack.
"""

from collections import OrderedDict
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from toptune.config.base import INIT_STD, LAYER_NORM_EPS
from toptune.errors import ModelError
from toptune.model.attention import CROSS, DECODER_SELF, ENCODER_SELF, PrefixInjection, Site, attend_with_prefix
from toptune.model.config import ModelConfig
from toptune.numeric import tensor as T
from toptune.numeric.params import ParamStore
from toptune.numeric.tensor import Tensor, name_scope

PROJECTIONS = ("q", "k", "v", "o")


def _attention_shapes(prefix: str, dim: int) -> List[Tuple[str, Tuple[int, ...]]]:
    shapes = []
    for projection in PROJECTIONS:
        shapes.append((f"{prefix}.{projection}.weight", (dim, dim)))
        shapes.append((f"{prefix}.{projection}.bias", (dim,)))
    return shapes


def _norm_shapes(prefix: str, dim: int) -> List[Tuple[str, Tuple[int, ...]]]:
    return [(f"{prefix}.weight", (dim,)), (f"{prefix}.bias", (dim,))]


def _ffn_shapes(prefix: str, dim: int, ffn_dim: int) -> List[Tuple[str, Tuple[int, ...]]]:
    return [
        (f"{prefix}.fc1.weight", (dim, ffn_dim)), (f"{prefix}.fc1.bias", (ffn_dim,)),
        (f"{prefix}.fc2.weight", (ffn_dim, dim)), (f"{prefix}.fc2.bias", (dim,)),
    ]


def parameter_shapes(config: ModelConfig) -> "OrderedDict[str, Tuple[int, ...]]":
    """Every model parameter name with its shape, in a fixed order, without allocating."""
    d, f = config.hid_dim, config.ffn_dim
    shapes = [("embed.tokens", (config.vocab_size, d)), ("embed.positions", (config.max_positions, d))]
    for i in range(config.encoder_layers):
        layer = f"encoder.{i}"
        shapes += _attention_shapes(f"{layer}.self_attn", d) + _norm_shapes(f"{layer}.self_attn_norm", d)
        shapes += _ffn_shapes(f"{layer}.ffn", d, f) + _norm_shapes(f"{layer}.ffn_norm", d)
    shapes += _norm_shapes("encoder.final_norm", d)
    for i in range(config.decoder_layers):
        layer = f"decoder.{i}"
        shapes += _attention_shapes(f"{layer}.self_attn", d) + _norm_shapes(f"{layer}.self_attn_norm", d)
        shapes += _attention_shapes(f"{layer}.cross_attn", d) + _norm_shapes(f"{layer}.cross_attn_norm", d)
        shapes += _ffn_shapes(f"{layer}.ffn", d, f) + _norm_shapes(f"{layer}.ffn_norm", d)
    shapes += _norm_shapes("decoder.final_norm", d)
    return OrderedDict(shapes)


def init_params(config: ModelConfig, seed: int = 0) -> ParamStore:
    """N(0, 0.02) weights and embeddings, zero biases, unit layer-norm gains."""
    rng = np.random.default_rng(seed)
    store = ParamStore(config.precision)
    for name, shape in parameter_shapes(config).items():
        if name.endswith(".bias"):
            value = np.zeros(shape)
        elif "norm" in name:
            value = np.ones(shape)
        else:
            value = rng.normal(0.0, INIT_STD, size=shape)
        store.add(name, value)
    return store


@dataclass
class Batch:
    source: np.ndarray
    source_mask: np.ndarray
    decoder_input: np.ndarray
    target_mask: np.ndarray
    labels: np.ndarray
    label_weights: np.ndarray


def pad(sequences: Sequence[Sequence[int]], fill: int = 0) -> Tuple[np.ndarray, np.ndarray]:
    width = max(len(s) for s in sequences)
    ids = np.full((len(sequences), width), fill, dtype=np.int64)
    mask = np.zeros((len(sequences), width), dtype=bool)
    for row, sequence in enumerate(sequences):
        ids[row, :len(sequence)] = sequence
        mask[row, :len(sequence)] = True
    return ids, mask


def make_batch(sources: Sequence[Sequence[int]], targets: Sequence[Sequence[int]], dtype) -> Batch:
    """
    Teacher-forcing batch: the decoder reads target[:-1] and predicts target[1:].
    Each sequence's tokens weigh 1 / (its token count * batch size), so the loss
    is the mean over sequences of the per-sequence mean token cross-entropy.
    """
    if len(sources) != len(targets) or not sources:
        raise ModelError("a batch needs the same non-zero number of sources and targets")
    if any(len(t) < 2 for t in targets):
        raise ModelError("every target needs at least two tokens (bos ... eos)")
    source, source_mask = pad(sources)
    decoder_input, target_mask = pad([t[:-1] for t in targets])
    labels, label_mask = pad([t[1:] for t in targets])
    counts = label_mask.sum(axis=1, keepdims=True)
    weights = (label_mask / (counts * len(targets))).astype(dtype)
    return Batch(source, source_mask, decoder_input, target_mask, labels, weights)


@dataclass
class ForwardOutput:
    logits: Tensor
    loss: Tensor


class Seq2SeqTransformer:

    def __init__(self, config: ModelConfig):
        self.config = config

    def _check_ids(self, ids: np.ndarray, mask: np.ndarray, what: str) -> None:
        real = ids[mask]
        if real.size and (real.min() < 0 or real.max() >= self.config.vocab_size):
            raise ModelError(f"{what} id out of vocabulary range [0, {self.config.vocab_size})")
        if ids.shape[1] > self.config.max_positions:
            raise ModelError(f"{what} length {ids.shape[1]} exceeds max_positions {self.config.max_positions}")

    def _embed(self, p: Dict[str, Tensor], ids: np.ndarray) -> Tensor:
        with name_scope("embed"):
            return T.embedding(p["embed.tokens"], ids) + p["embed.positions"][:ids.shape[1]]

    def _norm(self, p: Dict[str, Tensor], prefix: str, x: Tensor) -> Tensor:
        return T.layer_norm(x, p[f"{prefix}.weight"], p[f"{prefix}.bias"], LAYER_NORM_EPS)

    def _linear(self, p: Dict[str, Tensor], prefix: str, x: Tensor) -> Tensor:
        return x @ p[f"{prefix}.weight"] + p[f"{prefix}.bias"]

    def _ffn(self, p: Dict[str, Tensor], prefix: str, x: Tensor) -> Tensor:
        return self._linear(p, f"{prefix}.fc2", T.gelu(self._linear(p, f"{prefix}.fc1", x)))

    def _attention(self, p, prefix: str, queries: Tensor, memory: Tensor, key_mask: np.ndarray,
                   causal: bool, injection: PrefixInjection, site: Site) -> Tensor:
        block = injection.get(site)
        out = attend_with_prefix(
            self._linear(p, f"{prefix}.q", queries),
            self._linear(p, f"{prefix}.k", memory),
            self._linear(p, f"{prefix}.v", memory),
            prefix=None if block is None else block.prefix,
            suffix=None if block is None else block.suffix,
            causal=causal,
            heads=self.config.heads,
            key_mask=key_mask,
        )
        return self._linear(p, f"{prefix}.o", out)

    def encode(self, p: Dict[str, Tensor], source: np.ndarray, source_mask: np.ndarray,
               injection: PrefixInjection) -> Tensor:
        self._check_ids(source, source_mask, "source")
        x = self._embed(p, source)
        for i in range(self.config.encoder_layers):
            layer = f"encoder.{i}"
            with name_scope(layer):
                h = self._norm(p, f"{layer}.self_attn_norm", x)
                x = x + self._attention(p, f"{layer}.self_attn", h, h, source_mask, False, injection,
                                        Site(ENCODER_SELF, i))
                x = x + self._ffn(p, f"{layer}.ffn", self._norm(p, f"{layer}.ffn_norm", x))
        with name_scope("encoder.final"):
            return self._norm(p, "encoder.final_norm", x)

    def decode(self, p: Dict[str, Tensor], memory: Tensor, source_mask: np.ndarray, decoder_input: np.ndarray,
               target_mask: np.ndarray, injection: PrefixInjection) -> Tensor:
        """Logits (B, T, V) for every decoder position."""
        self._check_ids(decoder_input, target_mask, "target")
        y = self._embed(p, decoder_input)
        for i in range(self.config.decoder_layers):
            layer = f"decoder.{i}"
            with name_scope(layer):
                h = self._norm(p, f"{layer}.self_attn_norm", y)
                y = y + self._attention(p, f"{layer}.self_attn", h, h, target_mask, True, injection,
                                        Site(DECODER_SELF, i))
                h = self._norm(p, f"{layer}.cross_attn_norm", y)
                y = y + self._attention(p, f"{layer}.cross_attn", h, memory, source_mask, False, injection,
                                        Site(CROSS, i))
                y = y + self._ffn(p, f"{layer}.ffn", self._norm(p, f"{layer}.ffn_norm", y))
        with name_scope("decoder.final"):
            y = self._norm(p, "decoder.final_norm", y)
            return y @ p["embed.tokens"].transpose(1, 0)

    def forward(self, p: Dict[str, Tensor], batch: Batch, injection: Optional[PrefixInjection] = None) -> ForwardOutput:
        injection = injection or PrefixInjection.empty()
        memory = self.encode(p, batch.source, batch.source_mask, injection)
        logits = self.decode(p, memory, batch.source_mask, batch.decoder_input, batch.target_mask, injection)
        b, t, v = logits.shape
        with name_scope("loss"):
            loss = T.cross_entropy(logits.reshape(b * t, v), batch.labels.reshape(-1),
                                   batch.label_weights.reshape(-1))
        return ForwardOutput(logits, loss)


def forward(config: ModelConfig, store: ParamStore, injection: Optional[PrefixInjection],
            source_ids: Sequence[Sequence[int]], target_ids: Sequence[Sequence[int]]) -> ForwardOutput:
    """Teacher-forced logits and loss over freshly bound leaves of `store`."""
    batch = make_batch(source_ids, target_ids, store.dtype)
    return Seq2SeqTransformer(config).forward(store.bind(), batch, injection)
