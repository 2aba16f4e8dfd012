# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled numeric kernels (Cython twin of ``kernels_py``).

Same function set, same accumulation order, same buffers; selected by
``triloc.numcore.backend`` when the extension is importable.
"""

from array import array

from libc.math cimport exp, log, sqrt, isfinite, INFINITY

from triloc.errors import DegenerateSceneError, ShapeError
from triloc.numcore.matrix import Matrix

NAME = "compiled"


cdef inline void _shape_check(bint cond, str msg) except *:
    if not cond:
        raise ShapeError(msg)


# -- dense products ----------------------------------------------------------


def matmul(a, b):
    _shape_check(a.cols == b.rows, f"matmul {a.shape} x {b.shape}")
    cdef Py_ssize_t n = a.rows, k = a.cols, m = b.cols
    out = Matrix(n, m)
    cdef double[::1] ad = a.data
    cdef double[::1] bd = b.data
    cdef double[::1] od = out.data
    cdef Py_ssize_t i, p, j
    cdef double aval
    for i in range(n):
        for p in range(k):
            aval = ad[i * k + p]
            for j in range(m):
                od[i * m + j] += aval * bd[p * m + j]
    return out


def matmul_at_b(a, b):
    _shape_check(a.rows == b.rows, f"matmul_at_b {a.shape} x {b.shape}")
    cdef Py_ssize_t n = a.rows, k = a.cols, m = b.cols
    out = Matrix(k, m)
    cdef double[::1] ad = a.data
    cdef double[::1] bd = b.data
    cdef double[::1] od = out.data
    cdef Py_ssize_t i, p, j
    cdef double aval
    for i in range(n):
        for p in range(k):
            aval = ad[i * k + p]
            for j in range(m):
                od[p * m + j] += aval * bd[i * m + j]
    return out


def matmul_a_bt(a, b):
    _shape_check(a.cols == b.cols, f"matmul_a_bt {a.shape} x {b.shape}")
    cdef Py_ssize_t n = a.rows, k = a.cols, m = b.rows
    out = Matrix(n, m)
    cdef double[::1] ad = a.data
    cdef double[::1] bd = b.data
    cdef double[::1] od = out.data
    cdef Py_ssize_t i, j, p
    cdef double acc
    for i in range(n):
        for j in range(m):
            acc = 0.0
            for p in range(k):
                acc += ad[i * k + p] * bd[j * k + p]
            od[i * m + j] = acc
    return out


# -- elementwise -------------------------------------------------------------


def add(a, b):
    _shape_check(a.shape == b.shape, f"add {a.shape} vs {b.shape}")
    out = a.copy()
    cdef double[::1] od = out.data
    cdef double[::1] bd = b.data
    cdef Py_ssize_t i, n = od.shape[0]
    for i in range(n):
        od[i] += bd[i]
    return out


def add_inplace(a, b):
    _shape_check(a.shape == b.shape, f"add_inplace {a.shape} vs {b.shape}")
    cdef double[::1] ad = a.data
    cdef double[::1] bd = b.data
    cdef Py_ssize_t i, n = ad.shape[0]
    for i in range(n):
        ad[i] += bd[i]


def add_scaled_inplace(a, b, double s):
    _shape_check(a.shape == b.shape, f"add_scaled_inplace {a.shape} vs {b.shape}")
    cdef double[::1] ad = a.data
    cdef double[::1] bd = b.data
    cdef Py_ssize_t i, n = ad.shape[0]
    for i in range(n):
        ad[i] += s * bd[i]


def scale(a, double s):
    out = a.copy()
    cdef double[::1] od = out.data
    cdef Py_ssize_t i, n = od.shape[0]
    for i in range(n):
        od[i] *= s
    return out


def mul(a, b):
    _shape_check(a.shape == b.shape, f"mul {a.shape} vs {b.shape}")
    out = a.copy()
    cdef double[::1] od = out.data
    cdef double[::1] bd = b.data
    cdef Py_ssize_t i, n = od.shape[0]
    for i in range(n):
        od[i] *= bd[i]
    return out


def add_row_broadcast(x, brow):
    _shape_check(brow.rows == 1 and brow.cols == x.cols,
                 f"bias {brow.shape} for {x.shape}")
    out = x.copy()
    cdef double[::1] od = out.data
    cdef double[::1] bd = brow.data
    cdef Py_ssize_t i, j, r = x.rows, c = x.cols
    for i in range(r):
        for j in range(c):
            od[i * c + j] += bd[j]
    return out


def col_sums(x):
    out = Matrix(1, x.cols)
    cdef double[::1] od = out.data
    cdef double[::1] xd = x.data
    cdef Py_ssize_t i, j, r = x.rows, c = x.cols
    for i in range(r):
        for j in range(c):
            od[j] += xd[i * c + j]
    return out


def relu_fwd(x):
    out = x.copy()
    cdef double[::1] od = out.data
    cdef Py_ssize_t i, n = od.shape[0]
    for i in range(n):
        if od[i] < 0.0:
            od[i] = 0.0
    return out


def relu_bwd(dy, x):
    _shape_check(dy.shape == x.shape, "relu_bwd shape mismatch")
    out = dy.copy()
    cdef double[::1] od = out.data
    cdef double[::1] xd = x.data
    cdef Py_ssize_t i, n = od.shape[0]
    for i in range(n):
        if xd[i] <= 0.0:
            od[i] = 0.0
    return out


def mask_rows(x, rowmask):
    _shape_check(len(rowmask) == x.rows, "row mask length mismatch")
    out = x.copy()
    cdef double[::1] od = out.data
    cdef const unsigned char[::1] mk = rowmask
    cdef Py_ssize_t i, j, r = x.rows, c = x.cols
    for i in range(r):
        if not mk[i]:
            for j in range(c):
                od[i * c + j] = 0.0
    return out


# -- softmax family ----------------------------------------------------------


def row_softmax_colmask_fwd(x, colmask):
    _shape_check(len(colmask) == x.cols, "col mask length mismatch")
    out = Matrix(x.rows, x.cols)
    cdef double[::1] xd = x.data
    cdef double[::1] od = out.data
    cdef const unsigned char[::1] mk = colmask
    cdef Py_ssize_t i, j, r = x.rows, c = x.cols
    cdef double hi, total, e, inv
    for i in range(r):
        hi = -INFINITY
        for j in range(c):
            if mk[j] and xd[i * c + j] > hi:
                hi = xd[i * c + j]
        total = 0.0
        for j in range(c):
            if mk[j]:
                e = exp(xd[i * c + j] - hi)
                od[i * c + j] = e
                total += e
        inv = 1.0 / total
        for j in range(c):
            if mk[j]:
                od[i * c + j] *= inv
    return out


def softmax_bwd(dy, y):
    _shape_check(dy.shape == y.shape, "softmax_bwd shape mismatch")
    out = Matrix(y.rows, y.cols)
    cdef double[::1] dd = dy.data
    cdef double[::1] yd = y.data
    cdef double[::1] od = out.data
    cdef Py_ssize_t i, j, r = y.rows, c = y.cols
    cdef double dot
    for i in range(r):
        dot = 0.0
        for j in range(c):
            dot += dd[i * c + j] * yd[i * c + j]
        for j in range(c):
            od[i * c + j] = yd[i * c + j] * (dd[i * c + j] - dot)
    return out


def row_logsumexp_fwd(x):
    out = Matrix(x.rows, 1)
    cdef double[::1] xd = x.data
    cdef double[::1] od = out.data
    cdef Py_ssize_t i, j, r = x.rows, c = x.cols
    cdef double hi, total
    for i in range(r):
        hi = xd[i * c]
        for j in range(1, c):
            if xd[i * c + j] > hi:
                hi = xd[i * c + j]
        total = 0.0
        for j in range(c):
            total += exp(xd[i * c + j] - hi)
        od[i] = hi + log(total)
    return out


def row_logsumexp_bwd(dlse, x, lse):
    out = Matrix(x.rows, x.cols)
    cdef double[::1] xd = x.data
    cdef double[::1] od = out.data
    cdef double[::1] ld = lse.data
    cdef double[::1] dd = dlse.data
    cdef Py_ssize_t i, j, r = x.rows, c = x.cols
    cdef double g, ref
    for i in range(r):
        g = dd[i]
        ref = ld[i]
        for j in range(c):
            od[i * c + j] = exp(xd[i * c + j] - ref) * g
    return out


# -- row normalization ---------------------------------------------------------


def row_l2norm_fwd(x):
    y = Matrix(x.rows, x.cols)
    norms = Matrix(x.rows, 1)
    cdef double[::1] xd = x.data
    cdef double[::1] yd = y.data
    cdef double[::1] nd = norms.data
    cdef Py_ssize_t i, j, r = x.rows, c = x.cols
    cdef double acc, norm, inv, v
    for i in range(r):
        acc = 0.0
        for j in range(c):
            v = xd[i * c + j]
            acc += v * v
        norm = sqrt(acc)
        if norm < 1e-154:
            raise DegenerateSceneError(f"cannot normalize zero row {i}")
        nd[i] = norm
        inv = 1.0 / norm
        for j in range(c):
            yd[i * c + j] = xd[i * c + j] * inv
    return y, norms


def row_l2norm_bwd(dy, y, norms):
    out = Matrix(y.rows, y.cols)
    cdef double[::1] dd = dy.data
    cdef double[::1] yd = y.data
    cdef double[::1] nd = norms.data
    cdef double[::1] od = out.data
    cdef Py_ssize_t i, j, r = y.rows, c = y.cols
    cdef double dot, inv
    for i in range(r):
        dot = 0.0
        for j in range(c):
            dot += dd[i * c + j] * yd[i * c + j]
        inv = 1.0 / nd[i]
        for j in range(c):
            od[i * c + j] = (dd[i * c + j] - yd[i * c + j] * dot) * inv
    return out


# -- max pooling ---------------------------------------------------------------


def masked_colmax_fwd(x, rowmask):
    _shape_check(len(rowmask) == x.rows, "row mask length mismatch")
    out = Matrix(1, x.cols)
    arg = array("q", bytes(8 * x.cols))
    cdef double[::1] xd = x.data
    cdef double[::1] od = out.data
    cdef long long[::1] ag = arg
    cdef const unsigned char[::1] mk = rowmask
    cdef Py_ssize_t i, j, r = x.rows, c = x.cols
    cdef bint first = True
    for i in range(r):
        if not mk[i]:
            continue
        if first:
            for j in range(c):
                od[j] = xd[i * c + j]
                ag[j] = i
            first = False
        else:
            for j in range(c):
                if xd[i * c + j] > od[j]:
                    od[j] = xd[i * c + j]
                    ag[j] = i
    return out, arg


def masked_colmax_bwd(dy, arg, rows):
    out = Matrix(rows, dy.cols)
    cdef double[::1] od = out.data
    cdef double[::1] dd = dy.data
    cdef long long[::1] ag = arg
    cdef Py_ssize_t j, c = dy.cols
    for j in range(c):
        od[ag[j] * c + j] += dd[j]
    return out


def segment_colmax_fwd(x, offsets):
    cdef Py_ssize_t nseg = len(offsets) - 1
    cdef Py_ssize_t c = x.cols
    out = Matrix(nseg, c)
    arg = array("q", bytes(8 * nseg * c))
    cdef double[::1] xd = x.data
    cdef double[::1] od = out.data
    cdef long long[::1] ag = arg
    cdef long long[::1] offs = offsets
    cdef Py_ssize_t s, i, j, lo, hi
    for s in range(nseg):
        lo = offs[s]
        hi = offs[s + 1]
        _shape_check(0 <= lo < hi <= x.rows, f"bad segment [{lo},{hi})")
        for j in range(c):
            od[s * c + j] = xd[lo * c + j]
            ag[s * c + j] = lo
        for i in range(lo + 1, hi):
            for j in range(c):
                if xd[i * c + j] > od[s * c + j]:
                    od[s * c + j] = xd[i * c + j]
                    ag[s * c + j] = i
    return out, arg


def segment_colmax_bwd(dy, arg, rows):
    out = Matrix(rows, dy.cols)
    cdef double[::1] od = out.data
    cdef double[::1] dd = dy.data
    cdef long long[::1] ag = arg
    cdef Py_ssize_t k, c = dy.cols, n = dd.shape[0]
    for k in range(n):
        od[ag[k] * c + (k % c)] += dd[k]
    return out


# -- misc ----------------------------------------------------------------------


def transpose(x):
    out = Matrix(x.cols, x.rows)
    cdef double[::1] xd = x.data
    cdef double[::1] od = out.data
    cdef Py_ssize_t i, j, r = x.rows, c = x.cols
    for i in range(r):
        for j in range(c):
            od[j * r + i] = xd[i * c + j]
    return out


def has_nonfinite(x):
    cdef double[::1] xd = x.data
    cdef Py_ssize_t i, n = xd.shape[0]
    for i in range(n):
        if not isfinite(xd[i]):
            return True
    return False


def adam_update(p, g, m, v, long long t, double lr, double b1, double b2,
                double eps):
    _shape_check(p.shape == g.shape == m.shape == v.shape, "adam shapes mismatch")
    cdef double[::1] pd = p.data
    cdef double[::1] gd = g.data
    cdef double[::1] md = m.data
    cdef double[::1] vd = v.data
    cdef double c1 = 1.0 - b1 ** <double> t
    cdef double c2 = 1.0 - b2 ** <double> t
    cdef Py_ssize_t i, n = pd.shape[0]
    cdef double gi, mhat, vhat
    for i in range(n):
        gi = gd[i]
        md[i] = b1 * md[i] + (1.0 - b1) * gi
        vd[i] = b2 * vd[i] + (1.0 - b2) * gi * gi
        mhat = md[i] / c1
        vhat = vd[i] / c2
        pd[i] -= lr * mhat / (sqrt(vhat) + eps)
