"""Benchmark the compiled kernel core against the pure-Python fallback.

Times the operations that dominate training: the three dense-product
variants, the attention-sized softmax, the row normalization, and Adam.
The pure backend runs fewer repetitions; throughputs are normalized.
"""

from __future__ import annotations

import random
import time
from dataclasses import dataclass

from .numcore import Matrix, get_backend
from .numcore.backend import active_backend


@dataclass
class BenchResult:
    name: str
    shape: str
    per_call: dict  # backend -> seconds
    speedup: float  # python time / compiled time


def _rand(rng, rows, cols):
    return Matrix(rows, cols, [rng.uniform(-1, 1) for _ in range(rows * cols)])


def _time(fn, reps):
    t0 = time.perf_counter()
    for _ in range(reps):
        fn()
    return (time.perf_counter() - t0) / reps


def _cases(rng, scale):
    n = max(2, int(2048 * scale))
    p = max(2, int(8192 * scale))
    a = _rand(rng, n, 64)
    b = _rand(rng, 64, 64)
    big = _rand(rng, p, 3)
    w3 = _rand(rng, 3, 64)
    g = _rand(rng, n, 64)
    att = _rand(rng, 12, 12)
    mask = bytes([1] * 12)
    param = _rand(rng, 1, max(2, int(100_000 * scale)))
    grad = _rand(rng, 1, param.cols)
    m = param.zeros_like()
    v = param.zeros_like()
    state = {"t": 0}

    def adam(k):
        state["t"] += 1
        k.adam_update(param, grad, m, v, state["t"], 1e-4, 0.9, 0.999, 1e-8)

    return [
        ("matmul", f"({n}x64)@(64x64)", lambda k: k.matmul(a, b)),
        ("matmul_a_bt", f"({n}x64)@(64x64)T", lambda k: k.matmul_a_bt(a, b)),
        ("matmul_at_b", f"({n}x64)T@({n}x64)", lambda k: k.matmul_at_b(a, g)),
        ("point_mlp_layer", f"({p}x3)@(3x64)", lambda k: k.matmul(big, w3)),
        ("masked_softmax", "(12x12) x500",
         lambda k: [k.row_softmax_colmask_fwd(att, mask) for _ in range(500)]),
        ("row_l2norm", f"({n}x64)", lambda k: k.row_l2norm_fwd(a)),
        ("adam_update", f"{param.cols} params", lambda k: adam(k)),
    ]


def run_benchmark(scale: float = 1.0, reps_compiled: int = 5,
                  reps_python: int = 1, backends=("python", "compiled")):
    rng = random.Random(0)
    cases = _cases(rng, scale)
    results = []
    for name, shape, fn in cases:
        per_call = {}
        for backend_name in backends:
            k = get_backend(backend_name)
            reps = reps_compiled if backend_name == "compiled" else reps_python
            fn(k)  # warm up
            per_call[backend_name] = _time(lambda: fn(k), reps)
        speedup = (per_call.get("python", 0.0)
                   / per_call["compiled"]) if "compiled" in per_call else 0.0
        results.append(BenchResult(name, shape, per_call, speedup))
    return results


def format_results(results) -> str:
    lines = [
        f"active backend: {active_backend()}",
        f"{'kernel':<18} {'shape':<20} {'python':>12} {'compiled':>12} "
        f"{'speedup':>9}",
    ]
    for r in results:
        py = r.per_call.get("python")
        cc = r.per_call.get("compiled")
        lines.append(
            f"{r.name:<18} {r.shape:<20} "
            f"{(f'{py * 1e3:.2f} ms' if py is not None else '-'):>12} "
            f"{(f'{cc * 1e3:.2f} ms' if cc is not None else '-'):>12} "
            f"{(f'{r.speedup:.0f}x' if r.speedup else '-'):>9}"
        )
    return "\n".join(lines)
