import numpy as np
import pytest

from toptune.errors import ContractError, NonFiniteError, TensorError
from toptune.numeric import tensor as T
from toptune.numeric.adam import AdamState, adam_step
from toptune.numeric.gradcheck import gradient_check
from toptune.numeric.params import ParamStore, forward_backward, load_checkpoint, save_checkpoint
from toptune.numeric.tensor import Tensor, backward_counter, name_scope, no_grad


def _store(seed=0):
    rng = np.random.default_rng(seed)
    store = ParamStore("float64")
    store.add("a", rng.normal(size=(3, 4)))
    store.add("b", rng.normal(size=(4, 5)))
    store.add("gain", rng.normal(1.0, 0.1, size=(5,)))
    store.add("bias", rng.normal(size=(5,)))
    return store


_WEIGHTS = np.random.default_rng(1).normal(size=(3, 5))


def _weighted(x):
    return (x * _WEIGHTS).sum()


OPS = {
    "matmul": lambda p: _weighted(p["a"] @ p["b"]),
    "add_broadcast": lambda p: _weighted(p["a"] @ p["b"] + p["bias"]),
    "tanh": lambda p: _weighted(T.tanh(p["a"] @ p["b"])),
    "gelu": lambda p: _weighted(T.gelu(p["a"] @ p["b"])),
    "softmax": lambda p: _weighted(T.softmax(p["a"] @ p["b"], axis=-1)),
    "layer_norm": lambda p: _weighted(T.layer_norm(p["a"] @ p["b"], p["gain"], p["bias"], 1e-5)),
    "transpose_reshape": lambda p: _weighted((p["b"].transpose(1, 0) @ p["a"].transpose(1, 0))
                                             .transpose(1, 0).reshape(3, 5)),
    "slice_concat": lambda p: _weighted(T.concat([(p["a"] @ p["b"])[:, :2], (p["a"] @ p["b"])[:, 2:]], axis=1)),
    "mean": lambda p: (p["a"] @ p["b"]).mean(axis=0).sum() * 3.0,
    "cross_entropy": lambda p: T.cross_entropy(p["a"] @ p["b"], np.array([0, 4, 2]), np.array([0.5, 0.25, 0.25])),
}


@pytest.mark.parametrize("op", sorted(OPS))
def test_op_gradients_match_finite_differences(op):
    store = _store()
    results = gradient_check(OPS[op], store, samples=8)
    assert results
    assert all(check.passed for check in results.values()), {n: c.max_rel_error for n, c in results.items()}


def test_backward_needs_scalar():
    x = Tensor(np.ones((2, 2)), requires_grad=True)
    with pytest.raises(TensorError):
        (x * 2.0).backward()


def test_backward_on_constant_graph_is_a_no_op():
    x = Tensor(np.ones(3))
    loss = (x * 2.0).sum()
    loss.backward()
    assert x.grad is None


def test_matmul_shape_mismatch():
    with pytest.raises(TensorError):
        T.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))


def test_no_grad_records_nothing():
    x = Tensor(np.ones(3), requires_grad=True)
    with no_grad():
        y = x * 3.0
    assert not y.requires_grad
    assert y.parents == ()


def test_backward_counter_groups_by_scope():
    x = Tensor(np.ones(4), requires_grad=True)
    frozen = Tensor(np.ones(4))
    with name_scope("trained"):
        y = x * 2.0
    with name_scope("frozen"):
        z = T.tanh(frozen)
    with backward_counter() as counts:
        (y + z).sum().backward()
    assert counts["trained"] == 1
    assert "frozen" not in counts


def test_nested_scopes_join_with_dots():
    with name_scope("decoder.1"):
        with name_scope("ffn"):
            node = Tensor(np.ones(1))
    assert node.scope == "decoder.1.ffn"


def test_non_finite_loss_is_rejected():
    store = _store()
    params = store.bind()
    loss = (params["a"] * np.inf).sum()
    with pytest.raises(NonFiniteError):
        forward_backward(loss, store)


def test_store_rejects_non_finite_values():
    with pytest.raises(NonFiniteError):
        ParamStore().add("x", [1.0, np.nan])


def test_row_mask_needs_a_matrix():
    store = _store()
    with pytest.raises(ContractError):
        store.set_row_mask("bias", np.ones(5, dtype=bool))
    with pytest.raises(ContractError):
        store.set_row_mask("a", np.ones(2, dtype=bool))


def test_forward_backward_zeroes_rows_outside_the_mask():
    store = _store()
    store.freeze_all()
    store.set_row_mask("b", np.array([False, True, False, True]))
    params = store.bind()
    grads = forward_backward(_weighted(params["a"] @ params["b"]), store)
    assert set(grads) == {"b"}
    assert np.all(grads["b"][[0, 2]] == 0.0)
    assert np.any(grads["b"][[1, 3]] != 0.0)
    assert store.trainable_count() == 2 * 5


def test_adam_rejects_gradient_for_frozen_parameter():
    store = _store()
    store.set_trainable("a", False)
    with pytest.raises(ContractError):
        adam_step(store, AdamState(lr=0.1), {"a": np.ones((3, 4))})


def test_adam_rejects_wrong_gradient_shape():
    store = _store()
    with pytest.raises(TensorError):
        adam_step(store, AdamState(lr=0.1), {"a": np.ones((4, 3))})


def test_adam_only_writes_masked_rows():
    store = _store()
    store.freeze_all()
    mask = np.array([True, False, False, True])
    store.set_row_mask("b", mask)
    before = store["b"].copy()
    state = AdamState(lr=0.1)
    for _ in range(3):
        params = store.bind()
        adam_step(store, state, forward_backward(_weighted(params["a"] @ params["b"]), store))
    assert state.step == 3
    assert np.array_equal(store["b"][~mask], before[~mask])
    assert not np.array_equal(store["b"][mask], before[mask])


def test_first_adam_step_moves_by_learning_rate():
    store = ParamStore("float64")
    store.add("w", [1.0, -2.0])
    adam_step(store, AdamState(lr=0.01), {"w": np.array([3.0, -0.5])})
    assert np.allclose(store["w"], [0.99, -1.99])


def test_checkpoint_round_trip(tmp_path):
    store = _store()
    path = save_checkpoint(store, tmp_path / "params.ckpt")
    loaded = load_checkpoint(path)
    assert list(loaded) == list(store)
    for name in store:
        assert np.array_equal(loaded[name], store[name])
    assert loaded.checksum() == store.checksum()


def test_checkpoint_restores_into_existing_store(tmp_path):
    store = _store()
    path = save_checkpoint(store, tmp_path / "params.ckpt", names=["a"])
    other = _store(seed=5)
    other.set_trainable("a", False)
    load_checkpoint(path, other)
    assert np.array_equal(other["a"], store["a"])
    assert not other.trainable_mask["a"]


def test_checkpoint_rejects_foreign_files(tmp_path):
    path = tmp_path / "bogus.ckpt"
    path.write_bytes(b"NOPE" + bytes(16))
    with pytest.raises(ContractError):
        load_checkpoint(path)


def test_copy_and_snapshot_are_independent():
    store = _store()
    copy = store.copy()
    snapshot = store.snapshot()
    store["a"][0, 0] += 1.0
    assert copy["a"][0, 0] != store["a"][0, 0]
    store.restore(snapshot)
    assert store.checksum() == copy.checksum()
