import hashlib
import struct
from pathlib import Path
from typing import Dict, Iterable, Iterator, Optional, Union

import numpy as np

from toptune.config.base import CHECKPOINT_DTYPES, CHECKPOINT_MAGIC, CHECKPOINT_VERSION
from toptune.errors import ContractError, NonFiniteError, TensorError
from toptune.numeric.tensor import Tensor


class ParamStore:
    """
    Named parameter arrays with a trainable flag per entry and an optional
    per-row mask for matrices that are only partly trainable.
    """

    def __init__(self, dtype: Union[str, np.dtype] = "float64"):
        self.dtype = np.dtype(dtype)
        self.entries: Dict[str, np.ndarray] = {}
        self.trainable_mask: Dict[str, bool] = {}
        self.row_mask: Dict[str, Optional[np.ndarray]] = {}
        self._bound: Dict[str, Tensor] = {}

    def __contains__(self, name: str) -> bool:
        return name in self.entries

    def __getitem__(self, name: str) -> np.ndarray:
        return self.entries[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def add(self, name: str, value, trainable: bool = True) -> None:
        value = np.array(value, dtype=self.dtype, copy=True)
        if not np.all(np.isfinite(value)):
            raise NonFiniteError(f"parameter '{name}' has non-finite values")
        self.entries[name] = value
        self.trainable_mask[name] = trainable
        self.row_mask[name] = None

    def replace(self, name: str, value) -> None:
        """Swaps the array of an existing entry, keeping its masks unless the shape changed."""
        value = np.array(value, dtype=self.dtype, copy=True)
        if self.entries[name].shape != value.shape:
            self.row_mask[name] = None
        self.entries[name] = value

    def remove(self, name: str) -> None:
        del self.entries[name]
        del self.trainable_mask[name]
        del self.row_mask[name]
        self._bound.pop(name, None)

    def set_trainable(self, name: str, flag: bool) -> None:
        self.trainable_mask[name] = flag

    def freeze_all(self) -> None:
        for name in self.entries:
            self.trainable_mask[name] = False
            self.row_mask[name] = None

    def set_row_mask(self, name: str, mask: Optional[np.ndarray]) -> None:
        if mask is None:
            self.row_mask[name] = None
            return
        if self.entries[name].ndim != 2:
            raise ContractError(f"row mask needs a 2-D parameter, '{name}' has shape {self.entries[name].shape}")
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != (self.entries[name].shape[0],):
            raise ContractError(f"row mask for '{name}' must have {self.entries[name].shape[0]} entries")
        self.row_mask[name] = mask

    def requires_grad(self, name: str) -> bool:
        mask = self.row_mask[name]
        return self.trainable_mask[name] or (mask is not None and bool(mask.any()))

    def trainable_names(self):
        return [name for name in self.entries if self.requires_grad(name)]

    def frozen_names(self):
        return [name for name in self.entries if not self.requires_grad(name)]

    def count(self, names: Optional[Iterable[str]] = None) -> int:
        names = self.entries if names is None else names
        return int(sum(self.entries[name].size for name in names))

    def trainable_count(self) -> int:
        total = 0
        for name in self.entries:
            mask = self.row_mask[name]
            if self.trainable_mask[name]:
                total += self.entries[name].size
            elif mask is not None:
                total += int(mask.sum()) * self.entries[name].shape[1]
        return total

    def bind(self) -> Dict[str, Tensor]:
        """Creates fresh leaf tensors for one forward pass and remembers them for `forward_backward`."""
        self._bound = {name: Tensor(value, requires_grad=self.requires_grad(name))
                       for name, value in self.entries.items()}
        return self._bound

    @property
    def bound(self) -> Dict[str, Tensor]:
        return self._bound

    def snapshot(self) -> Dict[str, np.ndarray]:
        return {name: value.copy() for name, value in self.entries.items()}

    def restore(self, snapshot: Dict[str, np.ndarray]) -> None:
        for name, value in snapshot.items():
            self.entries[name] = value.copy()

    def copy(self) -> "ParamStore":
        other = ParamStore(self.dtype)
        for name, value in self.entries.items():
            other.entries[name] = value.copy()
            other.trainable_mask[name] = self.trainable_mask[name]
            mask = self.row_mask[name]
            other.row_mask[name] = None if mask is None else mask.copy()
        return other

    def astype(self, dtype) -> "ParamStore":
        other = self.copy()
        other.dtype = np.dtype(dtype)
        other.entries = {name: value.astype(other.dtype) for name, value in other.entries.items()}
        return other

    def checksum(self) -> str:
        digest = hashlib.sha256()
        for name in sorted(self.entries):
            digest.update(name.encode("utf-8"))
            digest.update(np.ascontiguousarray(self.entries[name]).tobytes())
        return digest.hexdigest()


def forward_backward(loss: Tensor, store: ParamStore) -> Dict[str, np.ndarray]:
    """
    Back-propagates a scalar loss built from `store.bind()` leaves. Returns a
    gradient per trainable parameter; rows outside a row mask are zeroed.
    """
    if loss.data.size != 1:
        raise TensorError(f"loss must be a scalar, got shape {loss.shape}")
    if not np.isfinite(loss.data).all():
        raise NonFiniteError("loss is not finite")
    loss.backward()
    grads: Dict[str, np.ndarray] = {}
    for name, leaf in store.bound.items():
        if not store.requires_grad(name):
            continue
        grad = leaf.grad if leaf.grad is not None else np.zeros_like(store.entries[name])
        if not np.all(np.isfinite(grad)):
            raise NonFiniteError(f"non-finite gradient for '{name}'")
        mask = store.row_mask[name]
        if mask is not None and not store.trainable_mask[name]:
            grad = grad.copy()
            grad[~mask] = 0.0
        grads[name] = grad
    return grads


_DTYPE_TAGS = {np.dtype("<f4"): 0, np.dtype("<f8"): 1, np.dtype("bool"): 2}


def save_checkpoint(store: ParamStore, path: Union[str, Path], names: Optional[Iterable[str]] = None) -> Path:
    """
    Writes: magic, version (u16), count (u32), then per entry name length (u16),
    UTF-8 name, dtype tag (u8), rank (u8), dims (u32 each), little-endian values.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    names = list(store.entries if names is None else names)
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<HI", CHECKPOINT_VERSION, len(names)))
        for name in names:
            value = store.entries[name]
            encoded = name.encode("utf-8")
            dtype = value.dtype.newbyteorder("<") if value.dtype.kind == "f" else value.dtype
            f.write(struct.pack("<H", len(encoded)))
            f.write(encoded)
            f.write(struct.pack("<BB", _DTYPE_TAGS[np.dtype(dtype)], value.ndim))
            f.write(struct.pack(f"<{value.ndim}I", *value.shape))
            f.write(np.ascontiguousarray(value, dtype=dtype).tobytes())
    return path


def load_checkpoint(path: Union[str, Path], store: Optional[ParamStore] = None) -> ParamStore:
    """Reads a checkpoint into `store` (or a new float64 store); loaded entries start trainable."""
    data = Path(path).read_bytes()
    if data[:4] != CHECKPOINT_MAGIC:
        raise ContractError(f"{path} is not a toptune checkpoint")
    version, count = struct.unpack_from("<HI", data, 4)
    if version != CHECKPOINT_VERSION:
        raise ContractError(f"unsupported checkpoint version {version}")
    offset = 10
    store = store if store is not None else ParamStore("float64")
    for _ in range(count):
        (name_length,) = struct.unpack_from("<H", data, offset)
        offset += 2
        name = data[offset:offset + name_length].decode("utf-8")
        offset += name_length
        tag, rank = struct.unpack_from("<BB", data, offset)
        offset += 2
        dims = struct.unpack_from(f"<{rank}I", data, offset)
        offset += 4 * rank
        dtype = np.dtype(CHECKPOINT_DTYPES[tag])
        size = int(np.prod(dims)) if rank else 1
        value = np.frombuffer(data, dtype=dtype, count=size, offset=offset).reshape(dims)
        offset += size * dtype.itemsize
        if name in store:
            store.replace(name, value)
        else:
            store.add(name, value)
    return store
