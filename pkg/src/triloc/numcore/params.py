"""Trainable parameter storage, seeded initialization, and checkpoint bytes.

All weights of a model live in one :class:`ParamStore`, addressed by
slash-separated paths (e.g. ``imib/color/l0/W``). Each entry pairs a tensor
with a same-shaped gradient buffer that the tape accumulates into.

File format (little-endian): magic ``ULOC``, version u32, then per entry
sorted by path: path length u32, UTF-8 path, rows u32, cols u32, f64 payload.
"""

from __future__ import annotations

import math
import random
import struct
import sys
from array import array

from ..errors import ContractError, ParamLookupError, ShapeError
from .matrix import Matrix
from .tape import Value

MAGIC = b"ULOC"
FORMAT_VERSION = 1


class _Entry:
    __slots__ = ("tensor", "grad", "leaf")

    def __init__(self, tensor: Matrix):
        self.tensor = tensor
        self.grad = tensor.zeros_like()
        self.leaf = None


class ParamStore:
    """Ordered collection of named (tensor, gradient) pairs."""

    def __init__(self):
        self._entries: dict[str, _Entry] = {}

    # -- registration --------------------------------------------------------

    def add(self, path: str, tensor: Matrix) -> None:
        if path in self._entries:
            raise ContractError(f"duplicate parameter path {path!r}")
        self._entries[path] = _Entry(tensor)

    def set_tensor(self, path: str, tensor: Matrix) -> None:
        """Overwrite an existing parameter's values (shape must match)."""
        entry = self._lookup(path)
        if entry.tensor.shape != tensor.shape:
            raise ShapeError(
                f"{path}: cannot assign {tensor.shape} over {entry.tensor.shape}"
            )
        entry.tensor.data[:] = tensor.data

    # -- access ----------------------------------------------------------------

    def _lookup(self, path: str) -> _Entry:
        try:
            return self._entries[path]
        except KeyError:
            raise ParamLookupError(f"no parameter at path {path!r}") from None

    def __contains__(self, path: str) -> bool:
        return path in self._entries

    def paths(self):
        return list(self._entries.keys())

    def tensor(self, path: str) -> Matrix:
        return self._lookup(path).tensor

    def grad(self, path: str) -> Matrix:
        return self._lookup(path).grad

    def value(self, path: str) -> Value:
        """Tape leaf for this parameter; cached so gradients accumulate."""
        entry = self._lookup(path)
        if entry.leaf is None:
            leaf = Value(entry.tensor, needs_grad=True)
            leaf.grad = entry.grad
            entry.leaf = leaf
        return entry.leaf

    def items(self):
        for path, entry in self._entries.items():
            yield path, entry.tensor, entry.grad

    def num_params(self) -> int:
        return sum(e.tensor.size for e in self._entries.values())

    def zero_grads(self) -> None:
        for entry in self._entries.values():
            entry.grad.fill_zero()

    # -- copying ---------------------------------------------------------------

    def clone(self) -> "ParamStore":
        out = ParamStore()
        for path, entry in self._entries.items():
            out.add(path, entry.tensor.copy())
        return out

    def copy_prefix_from(self, other: "ParamStore", prefix: str) -> int:
        """Copy every ``prefix``-rooted tensor from ``other`` over this store.

        Returns the number of parameters transferred; zero matches raise.
        """
        copied = 0
        for path in other.paths():
            if path.startswith(prefix):
                self.set_tensor(path, other.tensor(path))
                copied += 1
        if copied == 0:
            raise ParamLookupError(f"no parameters under prefix {prefix!r}")
        return copied

    # -- serialization -----------------------------------------------------------

    def to_bytes(self) -> bytes:
        chunks = [MAGIC, struct.pack("<I", FORMAT_VERSION)]
        for path in sorted(self._entries):
            tensor = self._entries[path].tensor
            encoded = path.encode("utf-8")
            chunks.append(struct.pack("<I", len(encoded)))
            chunks.append(encoded)
            chunks.append(struct.pack("<II", tensor.rows, tensor.cols))
            payload = tensor.data
            if sys.byteorder == "big":
                payload = array("d", payload)
                payload.byteswap()
            chunks.append(payload.tobytes())
        return b"".join(chunks)

    @classmethod
    def from_bytes(cls, blob: bytes) -> "ParamStore":
        if blob[:4] != MAGIC:
            raise ContractError("not a parameter file (bad magic)")
        (version,) = struct.unpack_from("<I", blob, 4)
        if version != FORMAT_VERSION:
            raise ContractError(f"unsupported parameter file version {version}")
        store = cls()
        off = 8
        while off < len(blob):
            (plen,) = struct.unpack_from("<I", blob, off)
            off += 4
            path = blob[off : off + plen].decode("utf-8")
            off += plen
            rows, cols = struct.unpack_from("<II", blob, off)
            off += 8
            nbytes = 8 * rows * cols
            data = array("d")
            data.frombytes(blob[off : off + nbytes])
            if len(data) != rows * cols:
                raise ContractError(f"truncated payload for {path!r}")
            if sys.byteorder == "big":
                data.byteswap()
            off += nbytes
            store.add(path, Matrix(rows, cols, data))
        return store

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path) -> "ParamStore":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())


# -- initialization ------------------------------------------------------------


def glorot_limit(fan_in: int, fan_out: int) -> float:
    return math.sqrt(6.0 / (fan_in + fan_out))


BIAS_INIT = 0.01  # small positive offset keeps ReLU units off the exact kink


def init_linear(store: ParamStore, prefix: str, d_in: int, d_out: int,
                seed_key: str) -> None:
    """Register W (uniform Glorot, seeded per path) and a near-zero bias b."""
    rng = random.Random(f"{seed_key}#{prefix}")
    limit = glorot_limit(d_in, d_out)
    w = Matrix(d_in, d_out,
               array("d", (rng.uniform(-limit, limit)
                           for _ in range(d_in * d_out))))
    store.add(f"{prefix}/W", w)
    store.add(f"{prefix}/b", Matrix.full(1, d_out, BIAS_INIT))


def init_mlp3(store: ParamStore, prefix: str, dims, seed_key: str) -> None:
    """Three stacked linear layers; ``dims`` is (d_in, h1, h2, d_out)."""
    if len(dims) != 4:
        raise ContractError(f"mlp3 needs 4 dims, got {dims}")
    for i in range(3):
        init_linear(store, f"{prefix}/l{i}", dims[i], dims[i + 1], seed_key)
