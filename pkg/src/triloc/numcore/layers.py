"""Differentiable building blocks: dense layers, 3-layer MLPs, attention.

All layer functions accept a ``Matrix`` or a ``Value`` and return a ``Value``
(the forward result plus its gradient record); callers that only need numbers
read ``.data``.
"""

from __future__ import annotations

import math

from ..errors import ConfigError, EmptySceneError, ShapeError
from . import tape
from .backend import kernels as K
from .matrix import Matrix, mask_bytes
from .params import ParamStore
from .tape import Value, as_value

_ACTIVATIONS = {"relu": tape.relu, "identity": lambda v: v}


def linear_forward(x, path: str, store: ParamStore) -> Value:
    """y = x @ W + b with parameters at ``{path}/W`` and ``{path}/b``."""
    x = as_value(x)
    w = store.value(f"{path}/W")
    if x.data.cols != w.data.rows:
        raise ShapeError(
            f"linear {path}: input {x.data.shape} vs weight {w.data.shape}"
        )
    return tape.add_bias(tape.matmul(x, w), store.value(f"{path}/b"))


def mlp3_forward(x, prefix: str, store: ParamStore,
                 activation: str = "relu") -> Value:
    """Three stacked linear layers with ``activation`` between them.

    No activation after the last layer.
    """
    try:
        act = _ACTIVATIONS[activation]
    except KeyError:
        raise ConfigError(f"unknown activation {activation!r}") from None
    h = linear_forward(x, f"{prefix}/l0", store)
    h = act(h)
    h = linear_forward(h, f"{prefix}/l1", store)
    h = act(h)
    return linear_forward(h, f"{prefix}/l2", store)


def mhsa_block_forward(x, mask, prefix: str, store: ParamStore,
                       heads: int) -> Value:
    """Residual multi-head self-attention block over instance rows.

    Computes ``t = h + ffn(h)`` where ``h = x + mhsa(x)``, with queries, keys
    and values all drawn from ``x`` itself. Masked rows are excluded from the
    keys/values and zeroed in the output; there is no positional encoding, so
    the block is permutation-equivariant over unmasked rows.
    """
    x = as_value(x)
    rows, dim = x.data.shape
    if dim % heads != 0:
        raise ConfigError(f"model dim {dim} not divisible by {heads} heads")
    mb = mask if isinstance(mask, bytes) else mask_bytes(mask)
    if len(mb) != rows:
        raise ShapeError(f"mask length {len(mb)} != {rows} rows")
    if not any(mb):
        raise EmptySceneError("attention over a fully masked scene")

    dh = dim // heads
    inv_sqrt_dh = 1.0 / math.sqrt(dh)
    q = linear_forward(x, f"{prefix}/attn/wq", store)
    k = linear_forward(x, f"{prefix}/attn/wk", store)
    v = linear_forward(x, f"{prefix}/attn/wv", store)

    ctx_heads = []
    for h in range(heads):
        j0, j1 = h * dh, (h + 1) * dh
        qh = tape.slice_cols(q, j0, j1)
        kh = tape.slice_cols(k, j0, j1)
        vh = tape.slice_cols(v, j0, j1)
        scores = tape.scale(tape.matmul(qh, tape.transpose(kh)), inv_sqrt_dh)
        attn = tape.masked_row_softmax(scores, mb)
        ctx_heads.append(tape.matmul(attn, vh))
    ctx = ctx_heads[0] if heads == 1 else tape.concat_cols(ctx_heads)
    attended = linear_forward(ctx, f"{prefix}/attn/wo", store)

    h1 = tape.add(x, attended)
    ffn = linear_forward(tape.relu(linear_forward(h1, f"{prefix}/ffn/l0", store)),
                         f"{prefix}/ffn/l1", store)
    out = tape.add(h1, ffn)
    return tape.mask_out_rows(out, mb)


def init_mhsa_block(store: ParamStore, prefix: str, dim: int, ffn_hidden: int,
                    seed_key: str) -> None:
    from .params import init_linear

    for name in ("wq", "wk", "wv", "wo"):
        init_linear(store, f"{prefix}/attn/{name}", dim, dim, seed_key)
    init_linear(store, f"{prefix}/ffn/l0", dim, ffn_hidden, seed_key)
    init_linear(store, f"{prefix}/ffn/l1", ffn_hidden, dim, seed_key)


def softmax(values, mask=None) -> list:
    """Masked, max-stabilized softmax over a plain float sequence.

    Masked entries output exactly 0; the rest are positive and sum to 1.
    """
    values = list(values)
    if mask is None:
        mask = [True] * len(values)
    mb = mask_bytes(mask)
    if len(mb) != len(values):
        raise ShapeError(f"mask length {len(mb)} != {len(values)}")
    if not any(mb):
        raise EmptySceneError("softmax over a fully masked sequence")
    row = Matrix.row_vector(values)
    return list(K.row_softmax_colmask_fwd(row, mb).data)
