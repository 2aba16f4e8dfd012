"""ParamStore registration, weight transfer, and the binary file format."""

import struct

import pytest

from triloc.errors import ContractError, ParamLookupError, ShapeError
from triloc.numcore import Matrix, ParamStore, init_linear, init_mlp3


def test_duplicate_path_rejected():
    store = ParamStore()
    store.add("a", Matrix.zeros(1, 1))
    with pytest.raises(ContractError):
        store.add("a", Matrix.zeros(1, 1))


def test_missing_path_raises_lookup():
    store = ParamStore()
    with pytest.raises(ParamLookupError):
        store.tensor("missing")


def test_grad_shapes_match():
    store = ParamStore()
    store.add("w", Matrix.zeros(2, 3))
    assert store.grad("w").shape == (2, 3)


def test_set_tensor_validates_shape():
    store = ParamStore()
    store.add("w", Matrix.zeros(2, 2))
    with pytest.raises(ShapeError):
        store.set_tensor("w", Matrix.zeros(3, 2))


def test_glorot_init_is_seeded_and_bounded():
    s1, s2 = ParamStore(), ParamStore()
    init_linear(s1, "lin", 10, 20, "k")
    init_linear(s2, "lin", 10, 20, "k")
    assert s1.tensor("lin/W") == s2.tensor("lin/W")
    limit = (6.0 / 30.0) ** 0.5
    assert all(abs(v) <= limit for v in s1.tensor("lin/W").data)
    assert list(s1.tensor("lin/b").data) == [0.01] * 20

    s3 = ParamStore()
    init_linear(s3, "lin", 10, 20, "other")
    assert s3.tensor("lin/W") != s1.tensor("lin/W")


def test_round_trip_bytes(tmp_path):
    store = ParamStore()
    init_mlp3(store, "m", (3, 4, 4, 2), "55")
    store.add("zzz/extra", Matrix.from_rows([[1.5, -2.5]]))
    path = tmp_path / "weights.bin"
    store.save(path)
    loaded = ParamStore.load(path)
    assert loaded.paths() == sorted(store.paths())
    for p in store.paths():
        assert loaded.tensor(p) == store.tensor(p)


def test_file_layout():
    store = ParamStore()
    store.add("b", Matrix.from_rows([[2.0]]))
    store.add("a", Matrix.from_rows([[1.0]]))
    blob = store.to_bytes()
    assert blob[:4] == b"ULOC"
    (version,) = struct.unpack_from("<I", blob, 4)
    assert version == 1
    # entries sorted by path: "a" first
    (plen,) = struct.unpack_from("<I", blob, 8)
    assert blob[12 : 12 + plen] == b"a"
    rows, cols = struct.unpack_from("<II", blob, 12 + plen)
    assert (rows, cols) == (1, 1)
    (val,) = struct.unpack_from("<d", blob, 20 + plen)
    assert val == 1.0


def test_bad_magic_and_version():
    with pytest.raises(ContractError):
        ParamStore.from_bytes(b"NOPE" + b"\x00" * 4)
    blob = ParamStore().to_bytes()
    tampered = blob[:4] + struct.pack("<I", 99)
    with pytest.raises(ContractError):
        ParamStore.from_bytes(tampered)


def test_copy_prefix_transfer():
    src = ParamStore()
    init_mlp3(src, "imib/fuse", (4, 4, 4, 4), "1")
    init_mlp3(src, "txib/mlp", (4, 4, 4, 4), "1")
    dst = ParamStore()
    init_mlp3(dst, "imib/fuse", (4, 4, 4, 4), "2")
    init_mlp3(dst, "txib/mlp", (4, 4, 4, 4), "2")
    assert dst.tensor("imib/fuse/l0/W") != src.tensor("imib/fuse/l0/W")
    n = dst.copy_prefix_from(src, "imib/")
    assert n == 6
    assert dst.tensor("imib/fuse/l0/W") == src.tensor("imib/fuse/l0/W")
    assert dst.tensor("txib/mlp/l0/W") != src.tensor("txib/mlp/l0/W")
    with pytest.raises(ParamLookupError):
        dst.copy_prefix_from(src, "pcib/")


def test_clone_is_deep():
    store = ParamStore()
    store.add("w", Matrix.from_rows([[1.0]]))
    dup = store.clone()
    dup.tensor("w").set(0, 0, 9.0)
    assert store.tensor("w").get(0, 0) == 1.0
