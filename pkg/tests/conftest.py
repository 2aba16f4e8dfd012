import random

import pytest

from triloc.numcore import Matrix
from triloc.numcore.tape import backward, variable


def rand_matrix(rng: random.Random, rows: int, cols: int, lo=-1.0, hi=1.0) -> Matrix:
    return Matrix(rows, cols, [rng.uniform(lo, hi) for _ in range(rows * cols)])


def to_numpy(m: Matrix):
    import numpy as np

    return np.array(m.to_rows(), dtype=float).reshape(m.rows, m.cols)


def from_numpy(arr) -> Matrix:
    rows, cols = arr.shape
    return Matrix(rows, cols, [float(v) for v in arr.reshape(-1)])


def fd_input_check(build, inputs, step=1e-6):
    """Worst relative error of tape gradients w.r.t. the given input matrices.

    ``build`` maps a list of Values to a scalar Value and is re-executed for
    the central differences, reading the (perturbed) matrices each time.
    """
    leaves = [variable(m) for m in inputs]
    loss = build(leaves)
    backward(loss)
    grads = [lv.ensure_grad().copy() for lv in leaves]

    worst = 0.0
    for m, g in zip(inputs, grads):
        for idx in range(m.size):
            saved = m.data[idx]
            m.data[idx] = saved + step
            f_plus = build([variable(x) for x in inputs]).item()
            m.data[idx] = saved - step
            f_minus = build([variable(x) for x in inputs]).item()
            m.data[idx] = saved
            fd = (f_plus - f_minus) / (2.0 * step)
            err = abs(g.data[idx] - fd) / max(1.0, abs(g.data[idx]), abs(fd))
            worst = max(worst, err)
    return worst


@pytest.fixture
def rng():
    return random.Random(1234)
