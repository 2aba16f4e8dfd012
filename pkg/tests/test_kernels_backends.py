"""Both kernel backends against numpy oracles and against each other."""

import math
import random
from array import array

import numpy as np
import pytest

from conftest import rand_matrix, to_numpy
from triloc.errors import DegenerateSceneError, ShapeError
from triloc.numcore import Matrix, get_backend

BACKENDS = ["python", "compiled"]


@pytest.fixture(params=BACKENDS)
def K(request):
    return get_backend(request.param)


def test_backend_names():
    assert get_backend("python").NAME == "python"
    assert get_backend("compiled").NAME == "compiled"


@pytest.mark.parametrize("shape", [(1, 1, 1), (3, 4, 5), (7, 2, 9), (16, 16, 16)])
def test_matmul_matches_numpy(K, rng, shape):
    n, k, m = shape
    a, b = rand_matrix(rng, n, k), rand_matrix(rng, k, m)
    got = to_numpy(K.matmul(a, b))
    want = to_numpy(a) @ to_numpy(b)
    assert np.max(np.abs(got - want)) < 1e-12


def test_matmul_shape_error(K):
    with pytest.raises(ShapeError):
        K.matmul(Matrix.zeros(2, 3), Matrix.zeros(2, 3))


def test_matmul_transposed_variants(K, rng):
    a, b = rand_matrix(rng, 5, 3), rand_matrix(rng, 5, 4)
    got = to_numpy(K.matmul_at_b(a, b))
    assert np.max(np.abs(got - to_numpy(a).T @ to_numpy(b))) < 1e-12
    c, d = rand_matrix(rng, 5, 3), rand_matrix(rng, 4, 3)
    got = to_numpy(K.matmul_a_bt(c, d))
    assert np.max(np.abs(got - to_numpy(c) @ to_numpy(d).T)) < 1e-12


def test_elementwise_and_broadcast(K, rng):
    a, b = rand_matrix(rng, 3, 4), rand_matrix(rng, 3, 4)
    assert np.allclose(to_numpy(K.add(a, b)), to_numpy(a) + to_numpy(b))
    assert np.allclose(to_numpy(K.mul(a, b)), to_numpy(a) * to_numpy(b))
    assert np.allclose(to_numpy(K.scale(a, 2.5)), 2.5 * to_numpy(a))
    bias = rand_matrix(rng, 1, 4)
    assert np.allclose(
        to_numpy(K.add_row_broadcast(a, bias)), to_numpy(a) + to_numpy(bias)
    )
    assert np.allclose(
        to_numpy(K.col_sums(a)), to_numpy(a).sum(axis=0, keepdims=True)
    )
    c = a.copy()
    K.add_inplace(c, b)
    assert np.allclose(to_numpy(c), to_numpy(a) + to_numpy(b))
    c = a.copy()
    K.add_scaled_inplace(c, b, -0.5)
    assert np.allclose(to_numpy(c), to_numpy(a) - 0.5 * to_numpy(b))


def test_relu(K, rng):
    x = rand_matrix(rng, 4, 4)
    y = K.relu_fwd(x)
    assert np.allclose(to_numpy(y), np.maximum(to_numpy(x), 0.0))
    dy = rand_matrix(rng, 4, 4)
    dx = K.relu_bwd(dy, x)
    assert np.allclose(to_numpy(dx), to_numpy(dy) * (to_numpy(x) > 0))


def test_mask_rows(K, rng):
    x = rand_matrix(rng, 3, 2)
    y = K.mask_rows(x, bytes([1, 0, 1]))
    assert y.row(1) == [0.0, 0.0]
    assert y.row(0) == x.row(0)


def test_masked_softmax_forward(K):
    x = Matrix.from_rows([[1.0, 2.0, 3.0], [1000.0, 1000.0, -5.0]])
    y = K.row_softmax_colmask_fwd(x, bytes([1, 1, 0]))
    rows = y.to_rows()
    assert rows[0][2] == 0.0
    assert abs(sum(rows[0]) - 1.0) < 1e-12
    assert abs(rows[1][0] - 0.5) < 1e-12  # no overflow at 1000


def test_softmax_backward_matches_jacobian(K, rng):
    x = rand_matrix(rng, 2, 4)
    mask = bytes([1, 1, 1, 1])
    y = K.row_softmax_colmask_fwd(x, mask)
    dy = rand_matrix(rng, 2, 4)
    dx = K.softmax_bwd(dy, y)
    yn, dyn = to_numpy(y), to_numpy(dy)
    for i in range(2):
        jac = np.diag(yn[i]) - np.outer(yn[i], yn[i])
        assert np.allclose(to_numpy(dx)[i], jac @ dyn[i])


def test_logsumexp(K, rng):
    x = rand_matrix(rng, 3, 5, -3, 3)
    lse = K.row_logsumexp_fwd(x)
    want = np.log(np.exp(to_numpy(x)).sum(axis=1))
    assert np.allclose(to_numpy(lse).ravel(), want)
    dlse = rand_matrix(rng, 3, 1)
    dx = K.row_logsumexp_bwd(dlse, x, lse)
    soft = np.exp(to_numpy(x) - want[:, None])
    assert np.allclose(to_numpy(dx), soft * to_numpy(dlse))


def test_l2norm(K, rng):
    x = rand_matrix(rng, 4, 3)
    y, norms = K.row_l2norm_fwd(x)
    xn = to_numpy(x)
    nn = np.linalg.norm(xn, axis=1)
    assert np.allclose(to_numpy(y), xn / nn[:, None])
    assert np.allclose(to_numpy(norms).ravel(), nn)
    with pytest.raises(DegenerateSceneError):
        K.row_l2norm_fwd(Matrix.zeros(1, 3))


def test_masked_colmax(K):
    x = Matrix.from_rows([[5.0, 0.0], [1.0, 9.0], [7.0, 2.0]])
    y, arg = K.masked_colmax_fwd(x, bytes([1, 1, 0]))
    assert y.to_rows() == [[5.0, 9.0]]
    assert list(arg) == [0, 1]
    dy = Matrix.from_rows([[1.0, 2.0]])
    dx = K.masked_colmax_bwd(dy, arg, 3)
    assert dx.to_rows() == [[1.0, 0.0], [0.0, 2.0], [0.0, 0.0]]


def test_segment_colmax(K):
    x = Matrix.from_rows([[1.0], [5.0], [2.0], [0.0], [3.0]])
    offsets = array("q", [0, 2, 5])
    y, arg = K.segment_colmax_fwd(x, offsets)
    assert y.to_rows() == [[5.0], [3.0]]
    assert list(arg) == [1, 4]
    dy = Matrix.from_rows([[10.0], [20.0]])
    dx = K.segment_colmax_bwd(dy, arg, 5)
    assert dx.to_rows() == [[0.0], [10.0], [0.0], [0.0], [20.0]]


def test_transpose(K, rng):
    x = rand_matrix(rng, 3, 5)
    assert np.allclose(to_numpy(K.transpose(x)), to_numpy(x).T)


def test_has_nonfinite(K):
    assert not K.has_nonfinite(Matrix.from_rows([[1.0, -2.0]]))
    assert K.has_nonfinite(Matrix.from_rows([[1.0, math.inf]]))
    assert K.has_nonfinite(Matrix.from_rows([[math.nan]]))


def test_adam_update_matches_reference(K):
    p = Matrix.from_rows([[1.0, 2.0]])
    g = Matrix.from_rows([[0.5, -1.0]])
    m = Matrix.zeros(1, 2)
    v = Matrix.zeros(1, 2)
    K.adam_update(p, g, m, v, 1, 0.1, 0.9, 0.999, 1e-8)
    for j, (pv, gv) in enumerate([(1.0, 0.5), (2.0, -1.0)]):
        mh = gv  # (1-b1)g / (1-b1)
        vh = gv * gv
        want = pv - 0.1 * mh / (math.sqrt(vh) + 1e-8)
        assert abs(p.get(0, j) - want) < 1e-15


def test_backends_agree_bitwise(rng):
    kp, kc = get_backend("python"), get_backend("compiled")
    a, b = rand_matrix(rng, 9, 7), rand_matrix(rng, 7, 5)
    assert kp.matmul(a, b) == kc.matmul(a, b)
    x = rand_matrix(rng, 6, 8)
    mask = bytes([1, 0, 1, 1, 0, 1, 1, 1])
    assert kp.row_softmax_colmask_fwd(x, mask) == kc.row_softmax_colmask_fwd(x, mask)
    y1, n1 = kp.row_l2norm_fwd(x)
    y2, n2 = kc.row_l2norm_fwd(x)
    assert y1 == y2 and n1 == n2
    assert kp.row_logsumexp_fwd(x) == kc.row_logsumexp_fwd(x)


def test_backend_selection_env(tmp_path):
    import subprocess
    import sys

    code = "from triloc.numcore import active_backend; print(active_backend())"
    out = subprocess.run(
        [sys.executable, "-c", code],
        env={"PATH": "/usr/bin:/bin", "TRILOC_BACKEND": "python"},
        capture_output=True,
        text=True,
        cwd=str(tmp_path),
    )
    assert out.stdout.strip() == "python"
    out = subprocess.run(
        [sys.executable, "-c", code],
        env={"PATH": "/usr/bin:/bin"},
        capture_output=True,
        text=True,
        cwd=str(tmp_path),
    )
    assert out.stdout.strip() == "compiled"
