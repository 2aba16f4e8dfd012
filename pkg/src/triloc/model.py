"""Model assembly: dataset records -> batched scene descriptors.

Bridges the instance branches and the attention pooling into one pipeline.
All instances of a batch flow through each branch in a single stacked matrix;
per-scene slices are then padded to the fixed slot count and pooled. Training
uses the returned tape values directly; evaluation reads the plain matrices.
"""

from __future__ import annotations

import random
from array import array

from .config import TrainConfig
from .errors import ContractError
from .instance import (
    centered_points,
    init_image_branch,
    init_point_branch,
    init_text_branch,
    image_batch,
    point_batch,
    text_batch,
)
from .numcore import Matrix
from .numcore.matrix import concat_rows as cat_rows_plain
from .numcore.params import ParamStore
from .numcore.tape import Value, concat_rows, constant, slice_rows
from .scene import V_MAX, init_sap_params, scene_vector_value
from .scenegen.hints import strip_position
from .scenegen.stubs import stub_embed

MODALITIES = ("text", "image", "point")
EVAL_CHUNK = 32


def select_text_hints(scene, k: int, seed: int):
    """Seeded sample of ``k`` instance records for the scene's description.

    With ``k`` at or above the instance count, all records return in their
    original order.
    """
    records = list(scene.instances)
    if k >= len(records):
        return records
    rng = random.Random(f"hints|{seed}|{scene.scene_id}")
    return rng.sample(records, k)


def init_scene_model_params(store: ParamStore, stub_dim: int,
                            cfg: TrainConfig, seed_key: str) -> None:
    init_text_branch(store, stub_dim, cfg.d, seed_key)
    init_image_branch(store, stub_dim, cfg.d, seed_key)
    init_point_branch(store, cfg.d, seed_key)
    for modality in MODALITIES:
        init_sap_params(store, modality, cfg.d, cfg.ffn,
                        cfg.sap_depth(modality), seed_key)


# -- batched record stacking -----------------------------------------------------


def _stack(rows_of_floats, cols: int) -> Matrix:
    flat = array("d")
    count = 0
    for row in rows_of_floats:
        flat.extend(row)
        count += 1
    return Matrix(count, cols, flat)


def _text_stub_rows(records, cfg: TrainConfig, stub_dim: int) -> Matrix:
    rows = []
    for rec in records:
        if cfg.use_uv and len(rec.stub_text_vec) == stub_dim:
            rows.append(rec.stub_text_vec)
        else:
            hint = rec.hint if cfg.use_uv else strip_position(rec.hint)
            rows.append(stub_embed(hint.split(), "text", stub_dim))
    return _stack(rows, stub_dim)


def text_instance_rows(records, store: ParamStore, cfg: TrainConfig) -> Value:
    stub_dim = store.tensor("txib/mlp/l0/W").rows
    return text_batch(constant(_text_stub_rows(records, cfg, stub_dim)), store)


def image_instance_rows(records, store: ParamStore, cfg: TrainConfig) -> Value:
    stub_dim = store.tensor("imib/sem/l0/W").rows
    sem = _stack((rec.stub_image_vec for rec in records), stub_dim)
    color = _stack((rec.instance3d.color_rgb for rec in records), 3)
    num = _stack(
        ([min(1.0, rec.pixel_count / cfg.pixel_count_norm)] for rec in records),
        1,
    )
    uv = _stack((rec.mean_uv for rec in records), 2)
    return image_batch(constant(sem), constant(color), constant(num),
                       constant(uv), store, use_uv=cfg.use_uv)


def point_instance_rows(records, store: ParamStore, cfg: TrainConfig) -> Value:
    pts = array("d")
    offsets = array("q", [0])
    total = 0
    for rec in records:
        for (x, y, z) in centered_points(rec.instance3d.points):
            pts.append(x)
            pts.append(y)
            pts.append(z)
        total += len(rec.instance3d.points)
        offsets.append(total)
    points = Matrix(total, 3, pts)
    color = _stack((rec.instance3d.color_rgb for rec in records), 3)
    num = _stack(
        (
            [min(1.0, len(rec.instance3d.points) / cfg.point_count_norm)]
            for rec in records
        ),
        1,
    )
    uv = _stack((rec.mean_uv for rec in records), 2)
    return point_batch(constant(points), offsets, constant(color),
                       constant(num), constant(uv), store, use_uv=cfg.use_uv)


_INSTANCE_ROWS = {
    "text": text_instance_rows,
    "image": image_instance_rows,
    "point": point_instance_rows,
}


def scene_descriptor_rows(scenes, modality: str, store: ParamStore,
                          cfg: TrainConfig, hint_seed: int = None,
                          hints: int = None) -> Value:
    """One unit-norm descriptor row per scene (tape value, N x D)."""
    if modality not in MODALITIES:
        raise ContractError(f"unknown modality {modality!r}")
    scenes = list(scenes)
    if not scenes:
        raise ContractError("no scenes to encode")
    if modality == "text":
        if hint_seed is None:
            hint_seed = cfg.eval_hint_seed
        k = hints if hints is not None else cfg.hints_per_scene
        per_scene = [select_text_hints(s, k, hint_seed) for s in scenes]
    else:
        per_scene = [list(s.instances) for s in scenes]

    flat_records = [rec for records in per_scene for rec in records]
    inst = _INSTANCE_ROWS[modality](flat_records, store, cfg)

    zero_row = constant(Matrix.zeros(1, cfg.d))
    out_rows = []
    offset = 0
    for records in per_scene:
        n = len(records)
        block = slice_rows(inst, offset, offset + n)
        offset += n
        if n < V_MAX:
            pads = [zero_row] * (V_MAX - n)
            block = concat_rows([block] + pads)
        mask = tuple(i < n for i in range(V_MAX))
        out_rows.append(
            scene_vector_value(block, mask, store, modality,
                               heads=cfg.heads, pool=cfg.pool)
        )
    return concat_rows(out_rows)


class SceneEncoder:
    """Frozen-weights encoder for building descriptor databases."""

    def __init__(self, store: ParamStore, cfg: TrainConfig):
        self.store = store
        self.cfg = cfg

    def descriptor_matrix(self, scenes, modality: str, hints: int = None,
                          hint_seed: int = None) -> Matrix:
        scenes = list(scenes)
        chunks = []
        for i in range(0, len(scenes), EVAL_CHUNK):
            value = scene_descriptor_rows(
                scenes[i : i + EVAL_CHUNK], modality, self.store, self.cfg,
                hint_seed=hint_seed, hints=hints,
            )
            chunks.append(value.data)
        return cat_rows_plain(chunks)

    def scene_vector(self, scene, modality: str):
        return self.descriptor_matrix([scene], modality).row(0)
