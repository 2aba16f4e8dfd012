"""Attention-pooled scene descriptors.

A scene's instance descriptors (one modality at a time, padded to a fixed slot
count with a mask) pass through a stack of self-attention blocks; a small MLP
scores each attended row, a masked softmax turns the scores into weights, and
the weighted sum, L2-normalized, is the scene descriptor. A masked max-pool
variant over the same attended rows backs the pooling ablation.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ConfigError, ContractError
from .numcore import Matrix, init_mlp3, mhsa_block_forward, mlp3_forward
from .numcore.layers import init_mhsa_block
from .numcore.params import ParamStore
from .numcore import tape
from .numcore.tape import Value, as_value

V_MAX = 12
MODALITIES = ("text", "image", "point")
DEFAULT_SAP_DEPTH = {"text": 1, "image": 2, "point": 2}
DEFAULT_HEADS = 4
POOL_MODES = ("sap", "max")


@dataclass(frozen=True)
class SceneInstanceSet:
    """Padded instance descriptors of one modality plus the slot mask."""

    F: Matrix
    mask: tuple
    modality: str

    def __post_init__(self):
        if self.modality not in MODALITIES:
            raise ConfigError(f"unknown modality {self.modality!r}")
        if len(self.mask) != self.F.rows:
            raise ContractError(
                f"mask length {len(self.mask)} != {self.F.rows} rows"
            )
        c = self.F.cols
        for i, active in enumerate(self.mask):
            if not active and any(
                v != 0.0 for v in self.F.data[i * c : (i + 1) * c]
            ):
                raise ContractError(f"masked row {i} is not zero")


@dataclass(frozen=True)
class SceneDescriptor:
    vec: tuple
    scene_id: int = -1
    location: tuple = (0.0, 0.0)


def init_sap_params(store: ParamStore, modality: str, dim: int,
                    ffn_hidden: int, depth: int, seed_key: str) -> None:
    if modality not in MODALITIES:
        raise ConfigError(f"unknown modality {modality!r}")
    for k in range(depth):
        init_mhsa_block(store, f"sap/{modality}/blk{k}", dim, ffn_hidden,
                        seed_key)
    init_mlp3(store, f"sap/{modality}/score", (dim, dim, dim, 1), seed_key)


def sap_depth(store: ParamStore, modality: str) -> int:
    depth = 0
    while f"sap/{modality}/blk{depth}/attn/wq/W" in store:
        depth += 1
    if depth == 0:
        raise ContractError(f"store holds no attention stack for {modality}")
    return depth


# -- tape-level pieces ------------------------------------------------------------


def sap_attention_value(x, mask, store: ParamStore, modality: str,
                        heads: int = DEFAULT_HEADS) -> Value:
    x = as_value(x)
    for k in range(sap_depth(store, modality)):
        x = mhsa_block_forward(x, mask, f"sap/{modality}/blk{k}", store, heads)
    return x


def sap_weights_value(t, mask, store: ParamStore, modality: str) -> Value:
    scores = mlp3_forward(as_value(t), f"sap/{modality}/score", store)
    return tape.masked_softmax_vec(scores, mask)


def sap_pool_value(t, w) -> Value:
    pooled = tape.matmul(tape.transpose(as_value(w)), as_value(t))
    return tape.row_l2_normalize(pooled)


def max_pool_value(t, mask) -> Value:
    return tape.row_l2_normalize(tape.masked_colmax(as_value(t), mask))


def scene_vector_value(x, mask, store: ParamStore, modality: str,
                       heads: int = DEFAULT_HEADS, pool: str = "sap") -> Value:
    """Instance rows (padded + mask) -> one unit-norm scene row."""
    if pool not in POOL_MODES:
        raise ConfigError(f"unknown pooling mode {pool!r}")
    t = sap_attention_value(x, mask, store, modality, heads)
    if pool == "max":
        return max_pool_value(t, mask)
    w = sap_weights_value(t, mask, store, modality)
    return sap_pool_value(t, w)


# -- plain surfaces ----------------------------------------------------------------


def sap_attention(sset: SceneInstanceSet, store: ParamStore,
                  heads: int = DEFAULT_HEADS) -> Matrix:
    return sap_attention_value(sset.F, sset.mask, store, sset.modality,
                               heads).data


def sap_weights(t: Matrix, mask, store: ParamStore, modality: str):
    return list(sap_weights_value(t, mask, store, modality).data.data)


def sap_pool(t: Matrix, weights):
    w = Matrix.column_vector(weights)
    return list(sap_pool_value(t, w).data.data)


def scene_descriptor(sset: SceneInstanceSet, store: ParamStore,
                     heads: int = DEFAULT_HEADS, pool: str = "sap",
                     scene_id: int = -1,
                     location=(0.0, 0.0)) -> SceneDescriptor:
    vec = scene_vector_value(sset.F, sset.mask, store, sset.modality,
                             heads, pool)
    return SceneDescriptor(tuple(vec.data.data), scene_id, tuple(location))
