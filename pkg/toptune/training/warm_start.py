from typing import Sequence

import numpy as np

from toptune.helpers.logs import Log
from toptune.model.config import ModelConfig
from toptune.numeric.adam import AdamState, adam_step
from toptune.numeric.params import ParamStore
from toptune.tokenizer.tokenizer import Tokenizer
from toptune.training.data import EncodedExample, micro_batches
from toptune.training.trainer import accumulate_gradients
from toptune.tuning.apply import TuningArtifacts
from toptune.tuning.strategy import TuningStrategy


def warm_start(config: ModelConfig, store: ParamStore, tokenizer: Tokenizer, utterances: Sequence[str],
               epochs: int, lr: float = 3e-4, batch_size: int = 8, seed: int = 0) -> ParamStore:
    """
    Copy-task pretraining (utterance -> utterance, every parameter trainable)
    so that strategies freezing the model start from a non-random network.
    Trainable flags are reset by the strategy applied afterwards.
    """
    if epochs <= 0 or not utterances:
        return store
    artifacts = TuningArtifacts(TuningStrategy.full(), config)
    store.freeze_all()
    for name in store:
        store.set_trainable(name, True)
    items = [EncodedExample(None, tokenizer.encode_source(text),
                            [tokenizer.vocab.bos_id] + tokenizer.encode(text, use_special=False) +
                            [tokenizer.vocab.eos_id])
             for text in utterances]
    optimizer = AdamState(lr=lr)
    rng = np.random.default_rng(seed)
    for epoch in range(1, epochs + 1):
        losses = []
        for batch in micro_batches(items, batch_size, rng):
            grads, loss = accumulate_gradients(store, artifacts, [batch])
            adam_step(store, optimizer, grads)
            losses.append(loss)
        Log.detail(f"Warm start epoch {epoch}/{epochs}: copy loss {np.mean(losses):.4f}")
    return store
