"""Per-op gradient checks and graph bookkeeping for the autodiff tape."""

import random
from array import array

import pytest

from conftest import fd_input_check, rand_matrix
from triloc.errors import ContractError, EmptySceneError, ShapeError
from triloc.numcore import Matrix, backward, constant, variable
from triloc.numcore import tape as T


def scalarize(v):
    return T.mean_all(v)


def test_backward_requires_scalar_root(rng):
    v = variable(rand_matrix(rng, 2, 2))
    with pytest.raises(ContractError):
        backward(T.relu(v))


def test_constant_gets_no_grad(rng):
    c = constant(rand_matrix(rng, 2, 2))
    v = variable(rand_matrix(rng, 2, 2))
    loss = scalarize(T.matmul(c, v))
    backward(loss)
    assert c.grad is None
    assert v.grad is not None


def test_diamond_graph_accumulates(rng):
    x = variable(Matrix.from_rows([[2.0]]))
    y = T.add(x, x)  # dy/dx = 2
    backward(scalarize(y))
    assert x.grad.get(0, 0) == pytest.approx(2.0)


def test_reused_leaf_across_subgraphs(rng):
    x = variable(Matrix.from_rows([[1.0, 2.0]]))
    a = T.scale(x, 3.0)
    b = T.scale(x, 5.0)
    backward(scalarize(T.concat_rows([a, b])))
    # d/dx mean over 4 entries of (3x | 5x) = (3 + 5)/4
    assert x.grad.row(0) == pytest.approx([2.0, 2.0])


@pytest.mark.parametrize(
    "name,build,shapes",
    [
        ("matmul", lambda vs: scalarize(T.matmul(vs[0], vs[1])), [(3, 4), (4, 2)]),
        ("add", lambda vs: scalarize(T.add(vs[0], vs[1])), [(3, 3), (3, 3)]),
        ("sub", lambda vs: scalarize(T.sub(vs[0], vs[1])), [(2, 3), (2, 3)]),
        ("scale", lambda vs: scalarize(T.scale(vs[0], -1.7)), [(3, 2)]),
        ("add_bias", lambda vs: scalarize(T.add_bias(vs[0], vs[1])), [(4, 3), (1, 3)]),
        ("relu", lambda vs: scalarize(T.relu(vs[0])), [(4, 4)]),
        ("transpose", lambda vs: scalarize(T.transpose(vs[0])), [(3, 5)]),
        (
            "concat_rows",
            lambda vs: scalarize(T.concat_rows(vs)),
            [(2, 3), (1, 3), (4, 3)],
        ),
        (
            "concat_cols",
            lambda vs: scalarize(T.concat_cols(vs)),
            [(2, 2), (2, 3)],
        ),
        ("slice_rows", lambda vs: scalarize(T.slice_rows(vs[0], 1, 3)), [(4, 3)]),
        ("slice_cols", lambda vs: scalarize(T.slice_cols(vs[0], 0, 2)), [(3, 4)]),
        (
            "masked_row_softmax",
            lambda vs: scalarize(
                T.masked_row_softmax(vs[0], [True, True, False, True])
            ),
            [(3, 4)],
        ),
        (
            "masked_softmax_vec",
            lambda vs: scalarize(T.masked_softmax_vec(vs[0], [True, False, True])),
            [(3, 1)],
        ),
        (
            "mask_out_rows",
            lambda vs: scalarize(T.mask_out_rows(vs[0], [True, False, True])),
            [(3, 4)],
        ),
        ("row_logsumexp", lambda vs: scalarize(T.row_logsumexp(vs[0])), [(3, 5)]),
        (
            "row_l2_normalize",
            lambda vs: scalarize(T.row_l2_normalize(vs[0])),
            [(3, 4)],
        ),
        (
            "masked_colmax",
            lambda vs: scalarize(T.masked_colmax(vs[0], [True, True, False])),
            [(3, 4)],
        ),
        (
            "segment_colmax",
            lambda vs: scalarize(T.segment_colmax(vs[0], array("q", [0, 2, 5]))),
            [(5, 3)],
        ),
        ("take_diag", lambda vs: scalarize(T.take_diag(vs[0])), [(4, 4)]),
    ],
)
def test_op_gradients_match_finite_differences(name, build, shapes):
    rng = random.Random(hash(name) & 0xFFFF)
    inputs = [rand_matrix(rng, r, c) for r, c in shapes]
    worst = fd_input_check(build, inputs)
    assert worst < 1e-7, f"{name}: worst rel error {worst}"


def test_masked_softmax_rejects_empty_mask(rng):
    with pytest.raises(EmptySceneError):
        T.masked_row_softmax(variable(rand_matrix(rng, 2, 3)), [False] * 3)


def test_take_diag_requires_square(rng):
    with pytest.raises(ShapeError):
        T.take_diag(variable(rand_matrix(rng, 2, 3)))


def test_segment_colmax_rejects_empty_segment(rng):
    with pytest.raises(ContractError):
        T.segment_colmax(variable(rand_matrix(rng, 3, 2)), [0, 0, 3])


def test_mean_all_value(rng):
    v = variable(Matrix.from_rows([[1.0, 2.0], [3.0, 6.0]]))
    assert T.mean_all(v).item() == pytest.approx(3.0)
