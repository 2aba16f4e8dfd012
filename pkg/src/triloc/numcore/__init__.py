"""Minimal differentiable computation core.

Dense matrices, a define-by-run reverse-mode tape, dense/MLP/attention layers,
Adam, and finite-difference gradient checking. Kernels run on a compiled
extension when built, otherwise on a pure-Python fallback
(see :mod:`triloc.numcore.backend`).
"""

from .backend import active_backend, get_backend
from .gradcheck import grad_check
from .layers import (
    init_mhsa_block,
    linear_forward,
    mhsa_block_forward,
    mlp3_forward,
    softmax,
)
from .matrix import Matrix
from .optim import AdamState, adam_step, lr_at_epoch
from .params import ParamStore, init_linear, init_mlp3
from .tape import Value, backward, constant, variable

__all__ = [
    "Matrix",
    "Value",
    "ParamStore",
    "AdamState",
    "active_backend",
    "get_backend",
    "adam_step",
    "backward",
    "constant",
    "variable",
    "grad_check",
    "init_linear",
    "init_mhsa_block",
    "init_mlp3",
    "linear_forward",
    "lr_at_epoch",
    "mhsa_block_forward",
    "mlp3_forward",
    "softmax",
]
