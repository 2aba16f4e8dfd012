"""Dense float64 matrices stored row-major in flat ``array('d')`` buffers.

This is the only tensor type in the package. All numeric kernels (pure and
compiled alike) operate on these buffers; everything above them treats
``Matrix`` as an opaque value type.
"""

from __future__ import annotations

import math
from array import array

from ..errors import ShapeError


class Matrix:
    __slots__ = ("rows", "cols", "data")

    def __init__(self, rows: int, cols: int, data=None):
        if rows < 0 or cols < 0:
            raise ShapeError(f"negative dimensions ({rows}x{cols})")
        if data is None:
            data = array("d", bytes(8 * rows * cols))
        elif not isinstance(data, array) or data.typecode != "d":
            data = array("d", data)
        if len(data) != rows * cols:
            raise ShapeError(
                f"buffer holds {len(data)} values, expected {rows}x{cols}"
            )
        self.rows = rows
        self.cols = cols
        self.data = data

    # -- constructors ------------------------------------------------------

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "Matrix":
        return cls(rows, cols)

    @classmethod
    def full(cls, rows: int, cols: int, value: float) -> "Matrix":
        return cls(rows, cols, array("d", [float(value)] * (rows * cols)))

    @classmethod
    def from_rows(cls, rows_list) -> "Matrix":
        rows_list = [list(r) for r in rows_list]
        rows = len(rows_list)
        cols = len(rows_list[0]) if rows else 0
        flat = array("d")
        for r in rows_list:
            if len(r) != cols:
                raise ShapeError("ragged rows")
            flat.extend(float(v) for v in r)
        return cls(rows, cols, flat)

    @classmethod
    def row_vector(cls, values) -> "Matrix":
        values = array("d", (float(v) for v in values))
        return cls(1, len(values), values)

    @classmethod
    def column_vector(cls, values) -> "Matrix":
        values = array("d", (float(v) for v in values))
        return cls(len(values), 1, values)

    @classmethod
    def identity(cls, n: int) -> "Matrix":
        m = cls(n, n)
        for i in range(n):
            m.data[i * n + i] = 1.0
        return m

    # -- views / conversions -----------------------------------------------

    @property
    def shape(self):
        return (self.rows, self.cols)

    @property
    def size(self) -> int:
        return self.rows * self.cols

    def copy(self) -> "Matrix":
        return Matrix(self.rows, self.cols, array("d", self.data))

    def zeros_like(self) -> "Matrix":
        return Matrix(self.rows, self.cols)

    def row(self, i: int):
        c = self.cols
        return list(self.data[i * c : (i + 1) * c])

    def to_rows(self):
        return [self.row(i) for i in range(self.rows)]

    def get(self, i: int, j: int) -> float:
        return self.data[i * self.cols + j]

    def set(self, i: int, j: int, value: float) -> None:
        self.data[i * self.cols + j] = float(value)

    def fill_zero(self) -> None:
        self.data = array("d", bytes(8 * self.rows * self.cols))

    def is_finite(self) -> bool:
        return all(math.isfinite(v) for v in self.data)

    # -- comparisons (test helpers) ------------------------------------------

    def max_abs_diff(self, other: "Matrix") -> float:
        if self.shape != other.shape:
            raise ShapeError(f"shape mismatch {self.shape} vs {other.shape}")
        a, b = self.data, other.data
        return max((abs(x - y) for x, y in zip(a, b)), default=0.0)

    def allclose(self, other: "Matrix", tol: float = 1e-12) -> bool:
        return self.max_abs_diff(other) <= tol

    def __eq__(self, other):
        return (
            isinstance(other, Matrix)
            and self.shape == other.shape
            and self.data == other.data
        )

    def __repr__(self):
        if self.size <= 16:
            return f"Matrix({self.to_rows()!r})"
        return f"Matrix({self.rows}x{self.cols})"


# -- structural helpers shared by both kernel backends -----------------------
# These are memory moves, not arithmetic; array slicing keeps them fast enough
# without a compiled twin.


def mask_bytes(mask) -> bytes:
    """Encode a boolean sequence as one byte per entry (1 = active)."""
    return bytes(1 if m else 0 for m in mask)


def concat_cols(mats) -> Matrix:
    mats = list(mats)
    rows = mats[0].rows
    for m in mats:
        if m.rows != rows:
            raise ShapeError("column concat needs equal row counts")
    cols = sum(m.cols for m in mats)
    out = Matrix(rows, cols)
    od = out.data
    for i in range(rows):
        base = i * cols
        off = 0
        for m in mats:
            c = m.cols
            od[base + off : base + off + c] = m.data[i * c : (i + 1) * c]
            off += c
    return out


def concat_rows(mats) -> Matrix:
    mats = list(mats)
    cols = mats[0].cols
    flat = array("d")
    for m in mats:
        if m.cols != cols:
            raise ShapeError("row concat needs equal column counts")
        flat.extend(m.data)
    return Matrix(len(flat) // cols if cols else 0, cols, flat)


def slice_rows(m: Matrix, i0: int, i1: int) -> Matrix:
    if not (0 <= i0 <= i1 <= m.rows):
        raise ShapeError(f"row slice [{i0}:{i1}] out of range for {m.rows} rows")
    c = m.cols
    return Matrix(i1 - i0, c, m.data[i0 * c : i1 * c])


def slice_cols(m: Matrix, j0: int, j1: int) -> Matrix:
    if not (0 <= j0 <= j1 <= m.cols):
        raise ShapeError(f"col slice [{j0}:{j1}] out of range for {m.cols} cols")
    w = j1 - j0
    out = Matrix(m.rows, w)
    md, od, c = m.data, out.data, m.cols
    for i in range(m.rows):
        od[i * w : (i + 1) * w] = md[i * c + j0 : i * c + j1]
    return out


def add_into_rows(dst: Matrix, src: Matrix, i0: int) -> None:
    """dst[i0:i0+src.rows, :] += src (grad scatter for row slices)."""
    if dst.cols != src.cols or i0 + src.rows > dst.rows:
        raise ShapeError("add_into_rows: slice does not fit")
    dd, sd = dst.data, src.data
    base = i0 * dst.cols
    for k in range(len(sd)):
        dd[base + k] += sd[k]


def add_into_cols(dst: Matrix, src: Matrix, j0: int) -> None:
    """dst[:, j0:j0+src.cols] += src (grad scatter for column slices)."""
    if dst.rows != src.rows or j0 + src.cols > dst.cols:
        raise ShapeError("add_into_cols: slice does not fit")
    dd, sd = dst.data, src.data
    c, w = dst.cols, src.cols
    for i in range(dst.rows):
        db = i * c + j0
        sb = i * w
        for k in range(w):
            dd[db + k] += sd[sb + k]
