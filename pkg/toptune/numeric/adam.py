from dataclasses import dataclass, field
from typing import Dict

import numpy as np

from toptune.config.base import ADAM_BETA1, ADAM_BETA2, ADAM_EPS
from toptune.errors import ContractError, TensorError
from toptune.numeric.params import ParamStore


@dataclass
class AdamState:
    lr: float
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    eps: float = ADAM_EPS
    step: int = 0
    first_moment: Dict[str, np.ndarray] = field(default_factory=dict)
    second_moment: Dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(store: ParamStore, state: AdamState, grads: Dict[str, np.ndarray]) -> AdamState:
    """
    One bias-corrected Adam update in place. Only trainable entries move; for a
    row-masked matrix only the rows in its mask are written.
    """
    for name, grad in grads.items():
        if name not in store:
            raise ContractError(f"gradient for unknown parameter '{name}'")
        if not store.requires_grad(name):
            raise ContractError(f"gradient supplied for frozen parameter '{name}'")
        if grad.shape != store[name].shape:
            raise TensorError(f"gradient shape {grad.shape} does not match '{name}' {store[name].shape}")

    state.step += 1
    correction1 = 1.0 - state.beta1 ** state.step
    correction2 = 1.0 - state.beta2 ** state.step
    for name, grad in grads.items():
        param = store[name]
        m = state.first_moment.get(name)
        v = state.second_moment.get(name)
        if m is None:
            m = np.zeros_like(param)
            v = np.zeros_like(param)
        m = state.beta1 * m + (1.0 - state.beta1) * grad
        v = state.beta2 * v + (1.0 - state.beta2) * grad * grad
        state.first_moment[name] = m
        state.second_moment[name] = v
        update = state.lr * (m / correction1) / (np.sqrt(v / correction2) + state.eps)

        mask = store.row_mask[name]
        if mask is not None and not store.trainable_mask[name]:
            param[mask] -= update[mask].astype(param.dtype)
        else:
            param -= update.astype(param.dtype)
    return state
