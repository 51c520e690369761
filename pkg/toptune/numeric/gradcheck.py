from dataclasses import dataclass
from typing import Callable, Dict, Iterable, Optional

import numpy as np

from toptune.numeric.params import ParamStore, forward_backward
from toptune.numeric.tensor import Tensor, no_grad


@dataclass
class GradientCheck:
    name: str
    checked: int
    max_abs_error: float
    max_rel_error: float
    passed: bool


def gradient_check(
        loss_fn: Callable[[Dict[str, Tensor]], Tensor],
        store: ParamStore,
        names: Optional[Iterable[str]] = None,
        h: float = 1e-5,
        rtol: float = 1e-4,
        atol: float = 1e-8,
        samples: int = 6,
        seed: int = 0,
) -> Dict[str, GradientCheck]:
    """
    Compares analytic gradients against central finite differences on up to
    `samples` coordinates per parameter. A coordinate passes when
    |analytic - numeric| <= atol + rtol * max(|analytic|, |numeric|).
    """
    rng = np.random.default_rng(seed)
    analytic = forward_backward(loss_fn(store.bind()), store)
    names = list(analytic if names is None else names)
    results = {}
    for name in names:
        param = store[name]
        flat = param.reshape(-1)
        candidates = np.arange(flat.size)
        mask = store.row_mask[name]
        if mask is not None and not store.trainable_mask[name]:
            candidates = np.flatnonzero(np.repeat(mask, param.shape[1]))
        chosen = candidates if len(candidates) <= samples else rng.choice(candidates, samples, replace=False)
        worst_abs, worst_rel, passed = 0.0, 0.0, True
        for index in chosen:
            original = flat[index]
            flat[index] = original + h
            with no_grad():
                plus = loss_fn(store.bind()).item()
            flat[index] = original - h
            with no_grad():
                minus = loss_fn(store.bind()).item()
            flat[index] = original
            numeric = (plus - minus) / (2 * h)
            exact = float(analytic[name].reshape(-1)[index])
            error = abs(exact - numeric)
            scale = max(abs(exact), abs(numeric))
            worst_abs = max(worst_abs, error)
            worst_rel = max(worst_rel, error / scale if scale > 0 else 0.0)
            if error > atol + rtol * scale:
                passed = False
        results[name] = GradientCheck(name, len(chosen), worst_abs, worst_rel, passed)
    store.bind()
    return results
