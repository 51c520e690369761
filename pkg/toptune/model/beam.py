from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from toptune.errors import ModelError
from toptune.model.attention import PrefixInjection
from toptune.model.config import ModelConfig
from toptune.model.transformer import Seq2SeqTransformer, pad
from toptune.numeric import tensor as T
from toptune.numeric.params import ParamStore
from toptune.numeric.tensor import no_grad

StepFn = Callable[[List[Tuple[int, ...]]], np.ndarray]


@dataclass(frozen=True)
class Hypothesis:
    tokens: Tuple[int, ...]
    log_prob: float

    @property
    def score(self) -> float:
        """Log-probability normalized by the number of generated tokens (eos included)."""
        generated = len(self.tokens) - 1
        return self.log_prob / generated if generated else self.log_prob

    def sort_key(self):
        return -self.score, self.tokens


def beam_search(step_fn: StepFn, bos: int, eos: int, beam_size: int, max_length: int) -> Hypothesis:
    """
    `step_fn` maps a list of token prefixes (each starting with bos) to an
    (n, V) array of next-token log-probabilities. At most `max_length` tokens
    are generated. The best finished hypothesis wins; when none finished the
    best partial one is returned. Equal scores resolve to the smaller token ids.
    """
    if beam_size < 1:
        raise ModelError(f"beam_size must be at least 1, got {beam_size}")
    beams = [Hypothesis((bos,), 0.0)]
    finished: List[Hypothesis] = []
    for _ in range(max_length):
        log_probs = step_fn([h.tokens for h in beams])
        candidates = []
        for hypothesis, row in zip(beams, log_probs):
            for token, value in enumerate(row):
                candidates.append(Hypothesis(hypothesis.tokens + (token,), hypothesis.log_prob + float(value)))
        candidates.sort(key=lambda h: (-h.log_prob, h.tokens))
        beams = []
        for candidate in candidates[:beam_size]:
            if candidate.tokens[-1] == eos:
                finished.append(candidate)
            else:
                beams.append(candidate)
        if not beams or len(finished) >= beam_size:
            break
    pool = finished or beams
    return min(pool, key=Hypothesis.sort_key)


def beam_decode(config: ModelConfig, store: ParamStore, injection: Optional[PrefixInjection],
                source_ids: Sequence[int], beam_size: int, max_target_length: int,
                bos: int, eos: int) -> List[int]:
    """Best target ids for one source, without bos and eos."""
    model = Seq2SeqTransformer(config)
    injection = injection or PrefixInjection.empty()
    limit = min(max_target_length, config.max_positions) - 1
    with no_grad():
        params = store.bind()
        source, source_mask = pad([list(source_ids)])
        memory = model.encode(params, source, source_mask, injection)

        def step(prefixes):
            n = len(prefixes)
            decoder_input, target_mask = pad(prefixes)
            tiled = T.Tensor(np.repeat(memory.data, n, axis=0))
            logits = model.decode(params, tiled, np.repeat(source_mask, n, axis=0), decoder_input,
                                  target_mask, injection).data
            lengths = target_mask.sum(axis=1) - 1
            last = logits[np.arange(n), lengths].astype(np.float64)
            last = last - last.max(axis=1, keepdims=True)
            return last - np.log(np.exp(last).sum(axis=1, keepdims=True))

        best = beam_search(step, bos, eos, beam_size, max(limit, 1))
    tokens = list(best.tokens[1:])
    if tokens and tokens[-1] == eos:
        tokens = tokens[:-1]
    return tokens
