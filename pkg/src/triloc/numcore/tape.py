"""Reverse-mode automatic differentiation over :class:`Matrix` values.

Every operation here builds a node in an implicit tape; ``backward`` walks the
recorded graph from a scalar loss and accumulates gradients into the leaves.
The graph is rebuilt on every forward pass (define-by-run), which is what lets
finite-difference checking re-evaluate a loss after perturbing a parameter.

Heavy arithmetic is delegated to the active kernel backend; this module only
does bookkeeping.
"""

from __future__ import annotations

import math
from array import array

from ..errors import ContractError, EmptySceneError, ShapeError
from .backend import kernels as K
from .matrix import (
    Matrix,
    add_into_cols,
    add_into_rows,
    mask_bytes,
)


class Value:
    """A matrix plus the bookkeeping needed to backpropagate through it."""

    __slots__ = ("data", "grad", "_parents", "_bwd", "needs_grad")

    def __init__(self, data: Matrix, parents=(), bwd=None, needs_grad=None):
        self.data = data
        self.grad = None
        self._parents = tuple(parents)
        self._bwd = bwd
        if needs_grad is None:
            needs_grad = any(p.needs_grad for p in self._parents)
        self.needs_grad = needs_grad

    @property
    def shape(self):
        return self.data.shape

    def ensure_grad(self) -> Matrix:
        if self.grad is None:
            self.grad = self.data.zeros_like()
        return self.grad

    def item(self) -> float:
        if self.data.shape != (1, 1):
            raise ContractError(f"item() on non-scalar {self.data.shape}")
        return self.data.data[0]


def constant(m: Matrix) -> Value:
    """Wrap a matrix the tape must treat as frozen (no gradient flows in)."""
    return Value(m, needs_grad=False)


def variable(m: Matrix) -> Value:
    """Wrap a matrix whose gradient should be tracked (a leaf)."""
    return Value(m, needs_grad=True)


def as_value(x) -> Value:
    if isinstance(x, Value):
        return x
    if isinstance(x, Matrix):
        return constant(x)
    raise ContractError(f"expected Matrix or Value, got {type(x).__name__}")


def backward(root: Value) -> None:
    """Accumulate gradients of a scalar ``root`` into every tracked leaf."""
    if root.data.shape != (1, 1):
        raise ContractError(f"backward root must be 1x1, got {root.data.shape}")
    order = _topo_order(root)
    root.ensure_grad().data[0] = 1.0
    for node in order:
        if node._bwd is not None and node.grad is not None:
            node._bwd(node.grad)


def _topo_order(root: Value):
    """Reverse topological order via iterative post-order DFS."""
    order = []
    seen = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen or not node.needs_grad:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen and p.needs_grad:
                stack.append((p, False))
    order.reverse()
    return order


def _accum(target: Value, g: Matrix) -> None:
    if target.needs_grad:
        K.add_inplace(target.ensure_grad(), g)


# -- arithmetic ops ----------------------------------------------------------


def matmul(a, b) -> Value:
    a, b = as_value(a), as_value(b)
    out_m = K.matmul(a.data, b.data)

    def bwd(g):
        if a.needs_grad:
            _accum(a, K.matmul_a_bt(g, b.data))
        if b.needs_grad:
            _accum(b, K.matmul_at_b(a.data, g))

    return Value(out_m, (a, b), bwd)


def add(a, b) -> Value:
    a, b = as_value(a), as_value(b)
    out_m = K.add(a.data, b.data)

    def bwd(g):
        _accum(a, g)
        _accum(b, g)

    return Value(out_m, (a, b), bwd)


def sub(a, b) -> Value:
    return add(a, scale(b, -1.0))

def scale(a, s: float) -> Value:
    a = as_value(a)
    out_m = K.scale(a.data, s)

    def bwd(g):
        _accum(a, K.scale(g, s))

    return Value(out_m, (a,), bwd)


def add_bias(x, brow) -> Value:
    """Row-broadcast bias add: every row of x gets the 1xC bias row."""
    x, brow = as_value(x), as_value(brow)
    out_m = K.add_row_broadcast(x.data, brow.data)

    def bwd(g):
        _accum(x, g)
        if brow.needs_grad:
            _accum(brow, K.col_sums(g))

    return Value(out_m, (x, brow), bwd)


def relu(x) -> Value:
    x = as_value(x)
    out_m = K.relu_fwd(x.data)

    def bwd(g):
        _accum(x, K.relu_bwd(g, x.data))

    return Value(out_m, (x,), bwd)


def transpose(x) -> Value:
    x = as_value(x)
    out_m = K.transpose(x.data)

    def bwd(g):
        _accum(x, K.transpose(g))

    return Value(out_m, (x,), bwd)


# -- structural ops ----------------------------------------------------------


def concat_rows(values) -> Value:
    values = [as_value(v) for v in values]
    from .matrix import concat_rows as cat

    out_m = cat([v.data for v in values])

    def bwd(g):
        from .matrix import slice_rows as srows

        i0 = 0
        for v in values:
            r = v.data.rows
            if v.needs_grad:
                _accum(v, srows(g, i0, i0 + r))
            i0 += r

    return Value(out_m, tuple(values), bwd)


def concat_cols(values) -> Value:
    values = [as_value(v) for v in values]
    from .matrix import concat_cols as cat

    out_m = cat([v.data for v in values])

    def bwd(g):
        from .matrix import slice_cols as scols

        j0 = 0
        for v in values:
            c = v.data.cols
            if v.needs_grad:
                _accum(v, scols(g, j0, j0 + c))
            j0 += c

    return Value(out_m, tuple(values), bwd)


def slice_rows(x, i0: int, i1: int) -> Value:
    x = as_value(x)
    from .matrix import slice_rows as srows

    out_m = srows(x.data, i0, i1)

    def bwd(g):
        if x.needs_grad:
            add_into_rows(x.ensure_grad(), g, i0)

    return Value(out_m, (x,), bwd)


def slice_cols(x, j0: int, j1: int) -> Value:
    x = as_value(x)
    from .matrix import slice_cols as scols

    out_m = scols(x.data, j0, j1)

    def bwd(g):
        if x.needs_grad:
            add_into_cols(x.ensure_grad(), g, j0)

    return Value(out_m, (x,), bwd)


# -- masking / softmax ---------------------------------------------------------


def _validated_mask(mask, length, what):
    mb = mask if isinstance(mask, bytes) else mask_bytes(mask)
    if len(mb) != length:
        raise ShapeError(f"{what} mask length {len(mb)} != {length}")
    if not any(mb):
        raise EmptySceneError(f"all {what} entries masked out")
    return mb


def masked_row_softmax(x, colmask) -> Value:
    """Per-row softmax over unmasked columns (masked columns output 0)."""
    x = as_value(x)
    mb = _validated_mask(colmask, x.data.cols, "column")
    out_m = K.row_softmax_colmask_fwd(x.data, mb)

    def bwd(g):
        _accum(x, K.softmax_bwd(g, out_m))

    return Value(out_m, (x,), bwd)


def masked_softmax_vec(x, mask) -> Value:
    """Softmax down a Vx1 column with a row mask; masked rows output 0."""
    x = as_value(x)
    if x.data.cols != 1:
        raise ShapeError(f"expected a column vector, got {x.data.shape}")
    return transpose(masked_row_softmax(transpose(x), mask))


def mask_out_rows(x, rowmask) -> Value:
    """Zero the masked rows (gradient is masked the same way)."""
    x = as_value(x)
    mb = _validated_mask(rowmask, x.data.rows, "row")
    out_m = K.mask_rows(x.data, mb)

    def bwd(g):
        _accum(x, K.mask_rows(g, mb))

    return Value(out_m, (x,), bwd)


def row_logsumexp(x) -> Value:
    x = as_value(x)
    lse = K.row_logsumexp_fwd(x.data)

    def bwd(g):
        _accum(x, K.row_logsumexp_bwd(g, x.data, lse))

    return Value(lse, (x,), bwd)


def row_l2_normalize(x) -> Value:
    x = as_value(x)
    y, norms = K.row_l2norm_fwd(x.data)

    def bwd(g):
        _accum(x, K.row_l2norm_bwd(g, y, norms))

    return Value(y, (x,), bwd)


def masked_colmax(x, rowmask) -> Value:
    """Column-wise max over unmasked rows -> 1xC."""
    x = as_value(x)
    mb = _validated_mask(rowmask, x.data.rows, "row")
    out_m, arg = K.masked_colmax_fwd(x.data, mb)
    rows = x.data.rows

    def bwd(g):
        _accum(x, K.masked_colmax_bwd(g, arg, rows))

    return Value(out_m, (x,), bwd)


def segment_colmax(x, offsets) -> Value:
    """Column-wise max per contiguous row segment -> (num segments)xC."""
    x = as_value(x)
    offs = offsets if isinstance(offsets, array) else array("q", offsets)
    if len(offs) < 2:
        raise ContractError("need at least one segment")
    for s in range(len(offs) - 1):
        if offs[s] >= offs[s + 1]:
            raise ContractError(f"empty segment at index {s}")
    out_m, arg = K.segment_colmax_fwd(x.data, offs)
    rows = x.data.rows

    def bwd(g):
        _accum(x, K.segment_colmax_bwd(g, arg, rows))

    return Value(out_m, (x,), bwd)


# -- reductions ----------------------------------------------------------------


def take_diag(x) -> Value:
    """Main diagonal of a square matrix as an Nx1 column."""
    x = as_value(x)
    n = x.data.rows
    if x.data.cols != n:
        raise ShapeError(f"take_diag needs a square matrix, got {x.data.shape}")
    out_m = Matrix(n, 1, array("d", (x.data.data[i * n + i] for i in range(n))))

    def bwd(g):
        if x.needs_grad:
            gd = x.ensure_grad().data
            for i in range(n):
                gd[i * n + i] += g.data[i]

    return Value(out_m, (x,), bwd)


def mean_all(x) -> Value:
    """Mean of all entries -> 1x1."""
    x = as_value(x)
    n = x.data.size
    if n == 0:
        raise ContractError("mean of an empty matrix")
    out_m = Matrix(1, 1, array("d", [math.fsum(x.data.data) / n]))

    def bwd(g):
        if x.needs_grad:
            gval = g.data[0] / n
            gd = x.ensure_grad().data
            for i in range(len(gd)):
                gd[i] += gval

    return Value(out_m, (x,), bwd)
