"""Adam optimizer and the stepped learning-rate schedule."""

from __future__ import annotations

from ..errors import ConfigError, NumericError
from .backend import kernels as K
from .matrix import Matrix
from .params import ParamStore

LR_DECAY_FACTOR = 0.4
LR_DECAY_EVERY = 7


class AdamState:
    """Per-parameter first/second moment estimates plus the shared step count."""

    def __init__(self, store: ParamStore, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step = 0
        self.m: dict[str, Matrix] = {}
        self.v: dict[str, Matrix] = {}
        for path, tensor, _ in store.items():
            self.m[path] = tensor.zeros_like()
            self.v[path] = tensor.zeros_like()


def adam_step(store: ParamStore, state: AdamState, lr: float) -> None:
    """One bias-corrected Adam update over every parameter; zeroes grads."""
    if lr <= 0.0:
        raise ConfigError(f"learning rate must be positive, got {lr}")
    state.step += 1
    for path, tensor, grad in store.items():
        if K.has_nonfinite(grad):
            raise NumericError(f"non-finite gradient at {path!r}")
        K.adam_update(tensor, grad, state.m[path], state.v[path],
                      state.step, lr, state.beta1, state.beta2, state.eps)
    store.zero_grads()


def lr_at_epoch(epoch: int, base: float) -> float:
    """Base rate decayed by 0.4 every 7 epochs (epoch is 0-based)."""
    if epoch < 0:
        raise ConfigError(f"epoch must be >= 0, got {epoch}")
    return base * LR_DECAY_FACTOR ** (epoch // LR_DECAY_EVERY)
