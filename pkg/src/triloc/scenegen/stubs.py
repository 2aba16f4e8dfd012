"""Deterministic frozen token embedders.

Stand-ins for pretrained text/image feature extractors: every token maps to a
fixed pseudo-random unit vector derived from a salted hash, and a token
sequence embeds as the mean of its token vectors. The text and image spaces
use different salts, so nothing aligns across spaces until a model learns to.
"""

from __future__ import annotations

import hashlib
import math
import random
from functools import lru_cache

from ..errors import ConfigError, ContractError

_SPACE_SALTS = {"text": "txt-space-v1", "image": "img-space-v1"}


@lru_cache(maxsize=1 << 16)
def _token_vector(salt: str, token: str, dim: int):
    digest = hashlib.sha256(f"{salt}|{token}".encode("utf-8")).digest()
    rng = random.Random(int.from_bytes(digest[:16], "little"))
    vec = [rng.gauss(0.0, 1.0) for _ in range(dim)]
    norm = math.sqrt(sum(v * v for v in vec))
    if norm < 1e-12:  # astronomically unlikely; keep the contract anyway
        vec[0] = 1.0
        norm = 1.0
    return tuple(v / norm for v in vec)


def stub_embed(tokens, space: str, dim: int):
    """Mean of per-token unit vectors in the given embedding space."""
    if space not in _SPACE_SALTS:
        raise ConfigError(f"unknown embedding space {space!r}")
    if dim <= 0:
        raise ConfigError(f"embedding dim must be positive, got {dim}")
    tokens = list(tokens)
    if not tokens:
        raise ContractError("cannot embed an empty token sequence")
    salt = _SPACE_SALTS[space]
    out = [0.0] * dim
    for tok in sorted(tokens):  # canonical order keeps the mean order-free
        vec = _token_vector(salt, tok, dim)
        for i in range(dim):
            out[i] += vec[i]
    inv = 1.0 / len(tokens)
    return [v * inv for v in out]
