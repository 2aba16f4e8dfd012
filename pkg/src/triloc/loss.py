"""Symmetric InfoNCE contrastive objectives and their weighted combination.

Positives sit on the diagonal of the similarity matrix between two aligned
batches; each anchor contrasts against every in-batch candidate in both
directions. Logits are dot products of unit-norm rows divided by the
temperature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ConfigError, ContractError
from .numcore import Matrix
from .numcore import tape
from .numcore.tape import Value, as_value


@dataclass(frozen=True)
class BatchPair:
    """Row-aligned descriptor batches; row i of A matches row i of B."""

    A: Matrix
    B: Matrix
    tau: float = 0.1

    def __post_init__(self):
        if self.tau <= 0.0:
            raise ConfigError(f"temperature must be positive, got {self.tau}")
        if self.A.shape != self.B.shape:
            raise ContractError(
                f"batch shapes differ: {self.A.shape} vs {self.B.shape}"
            )
        if self.A.rows < 1:
            raise ContractError("empty batch")
        for m in (self.A, self.B):
            c = m.cols
            for i in range(m.rows):
                norm = math.sqrt(
                    sum(v * v for v in m.data[i * c : (i + 1) * c])
                )
                if abs(norm - 1.0) > 1e-6:
                    raise ContractError(f"row {i} norm {norm} != 1")


def info_nce_symmetric(i: int, pair: BatchPair) -> float:
    """Both-direction InfoNCE term for anchor ``i`` (straight-line math)."""
    n = pair.A.rows
    if not (0 <= i < n):
        raise ContractError(f"index {i} outside batch of {n}")
    a = pair.A.to_rows()
    b = pair.B.to_rows()
    inv_tau = 1.0 / pair.tau

    def nll(anchor, candidates, positive_idx):
        logits = [
            sum(x * y for x, y in zip(anchor, cand)) * inv_tau
            for cand in candidates
        ]
        hi = max(logits)
        lse = hi + math.log(sum(math.exp(v - hi) for v in logits))
        return lse - logits[positive_idx]

    return nll(a[i], b, i) + nll(b[i], a, i)


def batch_contrastive_value(a, b, tau: float) -> Value:
    """Tape version of the batch loss (mean of symmetric per-anchor terms)."""
    if tau <= 0.0:
        raise ConfigError(f"temperature must be positive, got {tau}")
    a, b = as_value(a), as_value(b)
    if a.data.rows < 1:
        raise ContractError("empty batch")
    logits = tape.scale(tape.matmul(a, tape.transpose(b)), 1.0 / tau)
    diag = tape.take_diag(logits)
    fwd = tape.mean_all(tape.sub(tape.row_logsumexp(logits), diag))
    bwd = tape.mean_all(
        tape.sub(tape.row_logsumexp(tape.transpose(logits)), diag)
    )
    return tape.add(fwd, bwd)


def batch_contrastive(pair: BatchPair) -> float:
    return batch_contrastive_value(pair.A, pair.B, pair.tau).item()


def combined_scene_loss(l_it: float, l_ip: float, alpha: float) -> float:
    """alpha-weighted blend of the image-text and image-point scene losses."""
    if not (0.0 <= alpha <= 1.0):
        raise ConfigError(f"alpha must lie in [0,1], got {alpha}")
    return alpha * l_it + (1.0 - alpha) * l_ip


def combined_scene_loss_value(l_it: Value, l_ip: Value, alpha: float) -> Value:
    if not (0.0 <= alpha <= 1.0):
        raise ConfigError(f"alpha must lie in [0,1], got {alpha}")
    return tape.add(tape.scale(l_it, alpha), tape.scale(l_ip, 1.0 - alpha))
