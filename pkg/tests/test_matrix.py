import pytest

from triloc.errors import ShapeError
from triloc.numcore import Matrix
from triloc.numcore.matrix import (
    add_into_cols,
    add_into_rows,
    concat_cols,
    concat_rows,
    mask_bytes,
    slice_cols,
    slice_rows,
)


def test_zeros_and_shape():
    m = Matrix.zeros(2, 3)
    assert m.shape == (2, 3)
    assert list(m.data) == [0.0] * 6


def test_from_rows_round_trip():
    rows = [[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]
    m = Matrix.from_rows(rows)
    assert m.to_rows() == rows
    assert m.get(2, 1) == 6.0


def test_ragged_rows_rejected():
    with pytest.raises(ShapeError):
        Matrix.from_rows([[1.0], [1.0, 2.0]])


def test_buffer_length_validated():
    with pytest.raises(ShapeError):
        Matrix(2, 2, [1.0, 2.0, 3.0])


def test_copy_is_independent():
    m = Matrix.from_rows([[1.0, 2.0]])
    c = m.copy()
    c.set(0, 0, 9.0)
    assert m.get(0, 0) == 1.0


def test_identity():
    assert Matrix.identity(2).to_rows() == [[1.0, 0.0], [0.0, 1.0]]


def test_concat_and_slice_cols():
    a = Matrix.from_rows([[1, 2], [3, 4]])
    b = Matrix.from_rows([[5], [6]])
    m = concat_cols([a, b])
    assert m.to_rows() == [[1, 2, 5], [3, 4, 6]]
    assert slice_cols(m, 2, 3).to_rows() == [[5], [6]]
    assert slice_cols(m, 0, 2) == a


def test_concat_and_slice_rows():
    a = Matrix.from_rows([[1, 2]])
    b = Matrix.from_rows([[3, 4], [5, 6]])
    m = concat_rows([a, b])
    assert m.to_rows() == [[1, 2], [3, 4], [5, 6]]
    assert slice_rows(m, 1, 3) == b


def test_add_into_rows_and_cols():
    dst = Matrix.zeros(3, 2)
    add_into_rows(dst, Matrix.from_rows([[1, 1]]), 1)
    add_into_rows(dst, Matrix.from_rows([[2, 2]]), 1)
    assert dst.to_rows() == [[0, 0], [3, 3], [0, 0]]
    dst2 = Matrix.zeros(2, 3)
    add_into_cols(dst2, Matrix.from_rows([[1], [2]]), 2)
    assert dst2.to_rows() == [[0, 0, 1], [0, 0, 2]]


def test_mask_bytes():
    assert mask_bytes([True, False, True]) == b"\x01\x00\x01"


def test_max_abs_diff():
    a = Matrix.from_rows([[1.0, 2.0]])
    b = Matrix.from_rows([[1.0, 2.5]])
    assert a.max_abs_diff(b) == 0.5
    assert a.allclose(a)
