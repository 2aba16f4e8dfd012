"""Finite-difference verification of reverse-mode gradients.

``grad_check`` re-runs a recorded forward computation with each parameter
entry nudged up and down and compares the central difference against the
gradient the tape produced. The forward closure must be deterministic and must
read parameters from the store on every call.
"""

from __future__ import annotations

import random

from ..errors import ContractError
from .params import ParamStore
from .tape import backward


def grad_check(loss_fn, store: ParamStore, seed: int = 0, step: float = 1e-5,
               paths=None, max_entries_per_param=None,
               refine_threshold: float = 1e-6) -> dict:
    """Worst relative error between tape and numeric gradients, per path.

    Relative error is ``|g - g_fd| / max(1, |g|, |g_fd|)``. When
    ``max_entries_per_param`` is set, that many entries are sampled (seeded)
    per parameter instead of sweeping all of them.

    Entries whose error exceeds ``refine_threshold`` are re-probed at smaller
    steps and the best estimate kept: a probe that happens to straddle a ReLU
    kink produces a bogus numeric derivative that shrinks with the step,
    whereas a real gradient defect does not.
    """
    loss = loss_fn()
    if loss.data.shape != (1, 1):
        raise ContractError(
            f"grad_check root must be a 1x1 scalar, got {loss.data.shape}"
        )
    store.zero_grads()
    backward(loss)
    analytic = {path: grad.copy() for path, _, grad in store.items()}
    store.zero_grads()

    rng = random.Random(seed)
    if paths is None:
        paths = store.paths()
    report = {}
    for path in paths:
        tensor = store.tensor(path)
        size = tensor.size
        if max_entries_per_param is not None and size > max_entries_per_param:
            indices = rng.sample(range(size), max_entries_per_param)
        else:
            indices = range(size)
        worst = 0.0
        data = tensor.data
        g_tape = analytic[path].data
        for idx in indices:
            err = _entry_error(loss_fn, data, idx, g_tape[idx], step)
            if err > refine_threshold:
                for finer in (step / 16.0, step / 256.0):
                    err = min(err, _entry_error(loss_fn, data, idx,
                                                g_tape[idx], finer))
                    if err <= refine_threshold:
                        break
            if err > worst:
                worst = err
        report[path] = worst
    return report


def _entry_error(loss_fn, data, idx, g_tape, step):
    saved = data[idx]
    data[idx] = saved + step
    f_plus = loss_fn().item()
    data[idx] = saved - step
    f_minus = loss_fn().item()
    data[idx] = saved
    g_fd = (f_plus - f_minus) / (2.0 * step)
    return abs(g_tape - g_fd) / max(1.0, abs(g_tape), abs(g_fd))
