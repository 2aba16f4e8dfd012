"""Pure-Python numeric kernels.

Fallback twin of the compiled extension ``_kernels_c``; both expose the same
functions over :class:`~triloc.numcore.matrix.Matrix` buffers and must agree
bit-for-bit (same accumulation order everywhere). Use the compiled backend for
anything beyond toy sizes.
"""

from __future__ import annotations

import math
from array import array

from ..errors import DegenerateSceneError, ShapeError
from .matrix import Matrix

NAME = "python"


def _check(cond, msg):
    if not cond:
        raise ShapeError(msg)


# -- dense products ----------------------------------------------------------


def matmul(a: Matrix, b: Matrix) -> Matrix:
    _check(a.cols == b.rows, f"matmul {a.shape} x {b.shape}")
    n, k, m = a.rows, a.cols, b.cols
    out = Matrix(n, m)
    ad, bd, od = a.data, b.data, out.data
    for i in range(n):
        arow = i * k
        obase = i * m
        for p in range(k):
            aval = ad[arow + p]
            bbase = p * m
            for j in range(m):
                od[obase + j] += aval * bd[bbase + j]
    return out


def matmul_at_b(a: Matrix, b: Matrix) -> Matrix:
    """a.T @ b without materializing the transpose."""
    _check(a.rows == b.rows, f"matmul_at_b {a.shape} x {b.shape}")
    n, k, m = a.rows, a.cols, b.cols
    out = Matrix(k, m)
    ad, bd, od = a.data, b.data, out.data
    for i in range(n):
        abase = i * k
        bbase = i * m
        for p in range(k):
            aval = ad[abase + p]
            obase = p * m
            for j in range(m):
                od[obase + j] += aval * bd[bbase + j]
    return out


def matmul_a_bt(a: Matrix, b: Matrix) -> Matrix:
    """a @ b.T without materializing the transpose."""
    _check(a.cols == b.cols, f"matmul_a_bt {a.shape} x {b.shape}")
    n, k, m = a.rows, a.cols, b.rows
    out = Matrix(n, m)
    ad, bd, od = a.data, b.data, out.data
    for i in range(n):
        abase = i * k
        obase = i * m
        for j in range(m):
            bbase = j * k
            acc = 0.0
            for p in range(k):
                acc += ad[abase + p] * bd[bbase + p]
            od[obase + j] = acc
    return out


# -- elementwise -------------------------------------------------------------


def add(a: Matrix, b: Matrix) -> Matrix:
    _check(a.shape == b.shape, f"add {a.shape} vs {b.shape}")
    out = a.copy()
    od, bd = out.data, b.data
    for i in range(len(od)):
        od[i] += bd[i]
    return out


def add_inplace(a: Matrix, b: Matrix) -> None:
    _check(a.shape == b.shape, f"add_inplace {a.shape} vs {b.shape}")
    ad, bd = a.data, b.data
    for i in range(len(ad)):
        ad[i] += bd[i]


def add_scaled_inplace(a: Matrix, b: Matrix, s: float) -> None:
    _check(a.shape == b.shape, f"add_scaled_inplace {a.shape} vs {b.shape}")
    ad, bd = a.data, b.data
    for i in range(len(ad)):
        ad[i] += s * bd[i]


def scale(a: Matrix, s: float) -> Matrix:
    out = a.copy()
    od = out.data
    for i in range(len(od)):
        od[i] *= s
    return out


def mul(a: Matrix, b: Matrix) -> Matrix:
    _check(a.shape == b.shape, f"mul {a.shape} vs {b.shape}")
    out = a.copy()
    od, bd = out.data, b.data
    for i in range(len(od)):
        od[i] *= bd[i]
    return out


def add_row_broadcast(x: Matrix, brow: Matrix) -> Matrix:
    _check(brow.rows == 1 and brow.cols == x.cols,
           f"bias {brow.shape} for {x.shape}")
    out = x.copy()
    od, bd, c = out.data, brow.data, x.cols
    for i in range(x.rows):
        base = i * c
        for j in range(c):
            od[base + j] += bd[j]
    return out


def col_sums(x: Matrix) -> Matrix:
    out = Matrix(1, x.cols)
    od, xd, c = out.data, x.data, x.cols
    for i in range(x.rows):
        base = i * c
        for j in range(c):
            od[j] += xd[base + j]
    return out


def relu_fwd(x: Matrix) -> Matrix:
    out = x.copy()
    od = out.data
    for i in range(len(od)):
        if od[i] < 0.0:
            od[i] = 0.0
    return out


def relu_bwd(dy: Matrix, x: Matrix) -> Matrix:
    _check(dy.shape == x.shape, "relu_bwd shape mismatch")
    out = dy.copy()
    od, xd = out.data, x.data
    for i in range(len(od)):
        if xd[i] <= 0.0:
            od[i] = 0.0
    return out


def mask_rows(x: Matrix, rowmask: bytes) -> Matrix:
    _check(len(rowmask) == x.rows, "row mask length mismatch")
    out = x.copy()
    od, c = out.data, x.cols
    for i in range(x.rows):
        if not rowmask[i]:
            base = i * c
            for j in range(c):
                od[base + j] = 0.0
    return out


# -- softmax family ----------------------------------------------------------


def row_softmax_colmask_fwd(x: Matrix, colmask: bytes) -> Matrix:
    """Per-row softmax over the unmasked columns; masked columns output 0."""
    _check(len(colmask) == x.cols, "col mask length mismatch")
    out = Matrix(x.rows, x.cols)
    xd, od, c = x.data, out.data, x.cols
    for i in range(x.rows):
        base = i * c
        hi = -math.inf
        for j in range(c):
            if colmask[j] and xd[base + j] > hi:
                hi = xd[base + j]
        total = 0.0
        for j in range(c):
            if colmask[j]:
                e = math.exp(xd[base + j] - hi)
                od[base + j] = e
                total += e
        inv = 1.0 / total
        for j in range(c):
            if colmask[j]:
                od[base + j] *= inv
    return out


def softmax_bwd(dy: Matrix, y: Matrix) -> Matrix:
    _check(dy.shape == y.shape, "softmax_bwd shape mismatch")
    out = Matrix(y.rows, y.cols)
    dd, yd, od, c = dy.data, y.data, out.data, y.cols
    for i in range(y.rows):
        base = i * c
        dot = 0.0
        for j in range(c):
            dot += dd[base + j] * yd[base + j]
        for j in range(c):
            od[base + j] = yd[base + j] * (dd[base + j] - dot)
    return out


def row_logsumexp_fwd(x: Matrix) -> Matrix:
    out = Matrix(x.rows, 1)
    xd, od, c = x.data, out.data, x.cols
    for i in range(x.rows):
        base = i * c
        hi = xd[base]
        for j in range(1, c):
            if xd[base + j] > hi:
                hi = xd[base + j]
        total = 0.0
        for j in range(c):
            total += math.exp(xd[base + j] - hi)
        od[i] = hi + math.log(total)
    return out


def row_logsumexp_bwd(dlse: Matrix, x: Matrix, lse: Matrix) -> Matrix:
    out = Matrix(x.rows, x.cols)
    xd, od, ld, dd, c = x.data, out.data, lse.data, dlse.data, x.cols
    for i in range(x.rows):
        base = i * c
        g = dd[i]
        ref = ld[i]
        for j in range(c):
            od[base + j] = math.exp(xd[base + j] - ref) * g
    return out


# -- row normalization ---------------------------------------------------------


def row_l2norm_fwd(x: Matrix):
    y = Matrix(x.rows, x.cols)
    norms = Matrix(x.rows, 1)
    xd, yd, nd, c = x.data, y.data, norms.data, x.cols
    for i in range(x.rows):
        base = i * c
        acc = 0.0
        for j in range(c):
            v = xd[base + j]
            acc += v * v
        norm = math.sqrt(acc)
        if norm < 1e-154:
            raise DegenerateSceneError(f"cannot normalize zero row {i}")
        nd[i] = norm
        inv = 1.0 / norm
        for j in range(c):
            yd[base + j] = xd[base + j] * inv
    return y, norms


def row_l2norm_bwd(dy: Matrix, y: Matrix, norms: Matrix) -> Matrix:
    out = Matrix(y.rows, y.cols)
    dd, yd, nd, od, c = dy.data, y.data, norms.data, out.data, y.cols
    for i in range(y.rows):
        base = i * c
        dot = 0.0
        for j in range(c):
            dot += dd[base + j] * yd[base + j]
        inv = 1.0 / nd[i]
        for j in range(c):
            od[base + j] = (dd[base + j] - yd[base + j] * dot) * inv
    return out


# -- max pooling ---------------------------------------------------------------


def masked_colmax_fwd(x: Matrix, rowmask: bytes):
    """Column-wise max over unmasked rows. Returns (1 x cols, argrow array)."""
    _check(len(rowmask) == x.rows, "row mask length mismatch")
    out = Matrix(1, x.cols)
    arg = array("q", bytes(8 * x.cols))
    xd, od, c = x.data, out.data, x.cols
    first = True
    for i in range(x.rows):
        if not rowmask[i]:
            continue
        base = i * c
        if first:
            for j in range(c):
                od[j] = xd[base + j]
                arg[j] = i
            first = False
        else:
            for j in range(c):
                if xd[base + j] > od[j]:
                    od[j] = xd[base + j]
                    arg[j] = i
    return out, arg


def masked_colmax_bwd(dy: Matrix, arg, rows: int) -> Matrix:
    out = Matrix(rows, dy.cols)
    od, dd, c = out.data, dy.data, dy.cols
    for j in range(c):
        od[arg[j] * c + j] += dd[j]
    return out


def segment_colmax_fwd(x: Matrix, offsets):
    """Column-wise max per row segment ``[offsets[s], offsets[s+1])``."""
    nseg = len(offsets) - 1
    c = x.cols
    out = Matrix(nseg, c)
    arg = array("q", bytes(8 * nseg * c))
    xd, od = x.data, out.data
    for s in range(nseg):
        lo, hi = offsets[s], offsets[s + 1]
        _check(0 <= lo < hi <= x.rows, f"bad segment [{lo},{hi})")
        obase = s * c
        base = lo * c
        for j in range(c):
            od[obase + j] = xd[base + j]
            arg[obase + j] = lo
        for i in range(lo + 1, hi):
            base = i * c
            for j in range(c):
                if xd[base + j] > od[obase + j]:
                    od[obase + j] = xd[base + j]
                    arg[obase + j] = i
    return out, arg


def segment_colmax_bwd(dy: Matrix, arg, rows: int) -> Matrix:
    out = Matrix(rows, dy.cols)
    od, dd, c = out.data, dy.data, dy.cols
    for k in range(len(dd)):
        od[arg[k] * c + (k % c)] += dd[k]
    return out


# -- misc ----------------------------------------------------------------------


def transpose(x: Matrix) -> Matrix:
    out = Matrix(x.cols, x.rows)
    xd, od, r, c = x.data, out.data, x.rows, x.cols
    for i in range(r):
        base = i * c
        for j in range(c):
            od[j * r + i] = xd[base + j]
    return out


def has_nonfinite(x: Matrix) -> bool:
    for v in x.data:
        if not math.isfinite(v):
            return True
    return False


def adam_update(p: Matrix, g: Matrix, m: Matrix, v: Matrix, t: int,
                lr: float, b1: float, b2: float, eps: float) -> None:
    """In-place Adam step with bias correction (t is the 1-based step)."""
    _check(p.shape == g.shape == m.shape == v.shape, "adam shapes mismatch")
    pd, gd, md, vd = p.data, g.data, m.data, v.data
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    for i in range(len(pd)):
        gi = gd[i]
        md[i] = b1 * md[i] + (1.0 - b1) * gi
        vd[i] = b2 * vd[i] + (1.0 - b2) * gi * gi
        mhat = md[i] / c1
        vhat = vd[i] / c2
        pd[i] -= lr * mhat / (math.sqrt(vhat) + eps)
