import time
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence

from toptune.config.base import BEAM_SIZE, MAX_TARGET_LENGTH
from toptune.errors import ContractError
from toptune.model.beam import beam_decode
from toptune.numeric.params import ParamStore
from toptune.semantics.dataset import Example
from toptune.semantics.metric import unordered_em_text
from toptune.tokenizer.tokenizer import Tokenizer
from toptune.tuning.apply import TuningArtifacts

Predictor = Callable[[Example], str]


@dataclass(frozen=True)
class EvalResult:
    em: float
    matches: int
    total: int
    parse_failures: int
    epoch: int = 0
    seconds: float = 0.0


def score_predictions(predictions: Sequence[str], golds: Sequence[Example], epoch: int = 0,
                      seconds: float = 0.0) -> EvalResult:
    """Unordered semantics-only EM of bracketed predictions; unparsable ones count as misses."""
    if len(predictions) != len(golds):
        raise ContractError(f"{len(predictions)} predictions for {len(golds)} gold examples")
    matches = failures = 0
    for predicted, gold in zip(predictions, golds):
        match, failed = unordered_em_text(predicted, gold.tree)
        matches += match
        failures += failed
    total = len(golds)
    return EvalResult(matches / total if total else 0.0, matches, total, failures, epoch, seconds)


def model_predictor(store: ParamStore, artifacts: TuningArtifacts, tokenizer: Tokenizer,
                    beam_size: int = BEAM_SIZE, max_target_length: int = MAX_TARGET_LENGTH) -> Predictor:
    injection = artifacts.cached_injection(store)
    vocab = tokenizer.vocab

    def predict(example: Example) -> str:
        ids = beam_decode(artifacts.config, store, injection, tokenizer.encode_source(example.utterance),
                          beam_size, max_target_length, vocab.bos_id, vocab.eos_id)
        return tokenizer.decode(ids)

    return predict


def evaluate(store: ParamStore, artifacts: TuningArtifacts, tokenizer: Tokenizer, examples: Sequence[Example],
             beam_size: int = BEAM_SIZE, max_target_length: int = MAX_TARGET_LENGTH,
             predict: Optional[Predictor] = None, epoch: int = 0) -> EvalResult:
    """
    Beam-decodes every example, detokenizes and scores it. Parameters are
    checked unchanged afterwards.
    """
    started = time.monotonic()
    checksum = store.checksum()
    predict = predict or model_predictor(store, artifacts, tokenizer, beam_size, max_target_length)
    predictions: List[str] = [predict(example) for example in examples]
    if store.checksum() != checksum:
        raise ContractError("evaluation changed the parameters")
    return score_predictions(predictions, examples, epoch, time.monotonic() - started)
