"""
Teacher-forced training with gradient accumulation, per-epoch validation,
early stopping on validation EM and a post-training freeze audit.
"""

import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from toptune.config.base import CHECKPOINT_FILE, TRAIN_LOG_FILE
from toptune.errors import DataError, DivergenceError, FreezeViolation, NonFiniteError
from toptune.helpers.logs import Log
from toptune.model.transformer import Seq2SeqTransformer, make_batch
from toptune.numeric.adam import AdamState, adam_step
from toptune.numeric.params import ParamStore, forward_backward, save_checkpoint
from toptune.semantics.dataset import Example
from toptune.tokenizer.tokenizer import Tokenizer
from toptune.training.config import TrainConfig
from toptune.training.data import EncodedExample, encode_split, micro_batches
from toptune.training.evaluate import EvalResult, evaluate
from toptune.tuning.apply import TuningArtifacts, audit_frozen

Evaluator = Callable[[ParamStore, TuningArtifacts, Sequence[Example], int], EvalResult]


@dataclass
class TrainerState:
    best_em: float = -1.0
    best_epoch: int = 0
    epochs_since_improvement: int = 0
    epoch: int = 0
    optimizer: Optional[AdamState] = None
    rng: Optional[np.random.Generator] = None

    def record(self, em: float) -> bool:
        """Updates the early-stopping counter; True when `em` is a new best."""
        if em > self.best_em:
            self.best_em = em
            self.best_epoch = self.epoch
            self.epochs_since_improvement = 0
            return True
        self.epochs_since_improvement += 1
        return False


@dataclass
class TrainResult:
    state: TrainerState
    log: List[Dict[str, object]] = field(default_factory=list)
    checkpoint: Optional[Path] = None

    @property
    def best_em(self) -> float:
        return self.state.best_em


def accumulate_gradients(store: ParamStore, artifacts: TuningArtifacts,
                         groups: Sequence[Sequence[EncodedExample]]) -> Tuple[Dict[str, np.ndarray], float]:
    """
    Gradient and loss averaged over every example in `groups`, each group
    being one micro-batch. Returns example-weighted means.
    """
    model = Seq2SeqTransformer(artifacts.config)
    total = sum(len(group) for group in groups)
    summed: Dict[str, np.ndarray] = {}
    loss_sum = 0.0
    for group in groups:
        batch = make_batch([item.source for item in group], [item.target for item in group], store.dtype)
        params = store.bind()
        loss = model.forward(params, batch, artifacts.injection(params)).loss
        grads = forward_backward(loss, store)
        weight = len(group) / total
        loss_sum += loss.item() * weight
        for name, grad in grads.items():
            summed[name] = summed[name] + grad * weight if name in summed else grad * weight
    return summed, loss_sum


def _default_evaluator(tokenizer: Tokenizer, config: TrainConfig) -> Evaluator:
    def run(store, artifacts, examples, epoch):
        return evaluate(store, artifacts, tokenizer, examples, config.beam_size, config.max_target_length,
                        epoch=epoch)
    return run


def train(config: TrainConfig, artifacts: TuningArtifacts, store: ParamStore, tokenizer: Tokenizer,
          train_split: Sequence[Example], dev_split: Sequence[Example], run_dir: Optional[Path] = None,
          evaluator: Optional[Evaluator] = None) -> TrainResult:
    """
    Runs until `max_epochs` or until validation EM has not improved for
    `early_stopping_patience` evaluations. The store ends holding the best
    validation parameters.
    """
    if not train_split:
        raise DataError("training split is empty")
    evaluator = evaluator or _default_evaluator(tokenizer, config)
    encoded = encode_split(train_split, tokenizer, config.max_target_length)
    initial = store.snapshot()
    state = TrainerState(optimizer=AdamState(lr=config.lr), rng=np.random.default_rng(config.seed))
    result = TrainResult(state)
    best = store.snapshot()
    log_file = None
    if run_dir is not None:
        run_dir = Path(run_dir)
        run_dir.mkdir(parents=True, exist_ok=True)
        log_file = open(run_dir / TRAIN_LOG_FILE, "w", encoding="utf-8")
    started = time.monotonic()

    try:
        for epoch in range(1, config.max_epochs + 1):
            state.epoch = epoch
            losses = []
            groups: List[List[EncodedExample]] = []
            for step, batch in enumerate(micro_batches(encoded, config.batch_size, state.rng), start=1):
                groups.append(batch)
                if len(groups) == config.gradient_accumulation_steps:
                    losses.append(_update(store, artifacts, state, groups, epoch, step))
                    groups = []
            if groups:
                losses.append(_update(store, artifacts, state, groups, epoch, -1))

            train_loss = float(np.mean(losses))
            record: Dict[str, object] = {"epoch": epoch, "train_loss": round(train_loss, 6)}
            if epoch % config.evaluation_frequency == 0:
                scored = evaluator(store, artifacts, dev_split, epoch)
                if state.record(scored.em):
                    best = store.snapshot()
                record.update(validation_em=scored.em, parse_failures=scored.parse_failures)
            stop = state.epochs_since_improvement >= config.early_stopping_patience
            elapsed = time.monotonic() - started
            stop_state = f"stop (no improvement in {state.epochs_since_improvement})" if stop else \
                f"patience {state.epochs_since_improvement}/{config.early_stopping_patience}"
            record.update(elapsed_seconds=round(elapsed, 3), early_stop=stop_state)
            result.log.append(record)
            if log_file is not None:
                log_file.write(json.dumps(record, sort_keys=True) + "\n")
                log_file.flush()
            Log.epoch(epoch, train_loss, float(record.get("validation_em", float("nan"))), elapsed, stop_state)
            if stop:
                break
    finally:
        if log_file is not None:
            log_file.close()

    store.restore(best)
    violations = audit_frozen(store, initial)
    if violations:
        raise FreezeViolation(f"frozen parameters changed during training: {', '.join(violations)}")
    if run_dir is not None:
        result.checkpoint = save_checkpoint(store, run_dir / CHECKPOINT_FILE)
    return result


def _update(store: ParamStore, artifacts: TuningArtifacts, state: TrainerState,
            groups: Sequence[Sequence[EncodedExample]], epoch: int, step: int) -> float:
    try:
        grads, loss = accumulate_gradients(store, artifacts, groups)
    except NonFiniteError as e:
        where = f"epoch {epoch}" + (f", micro-batch {step}" if step > 0 else ", final micro-batch")
        raise DivergenceError(f"training diverged at {where}: {e}") from e
    adam_step(store, state.optimizer, grads)
    return loss
