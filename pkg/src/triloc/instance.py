"""Instance-level descriptor branches for text, image, and point inputs.

Each branch maps one object instance to a unit-norm D-vector. The text branch
runs the frozen text stub through an MLP; the image branch fuses semantic,
color, pixel-count, and UV sub-embeddings; the point branch fuses a
permutation-invariant point-set feature with the same color/count/UV cues.

The ``*_batch`` functions are the training path (N instances at once, on the
tape); the ``encode_*`` functions are their single-instance wrappers.
"""

from __future__ import annotations

import math
from array import array
from dataclasses import dataclass

from .errors import ContractError, NumericError
from .numcore import Matrix, init_mlp3, mlp3_forward
from .numcore import tape
from .numcore.params import ParamStore
from .numcore.tape import Value, as_value, concat_cols, constant
from .scenegen.stubs import stub_embed

SUB_ENCODERS = ("sem", "color", "num", "uv")


@dataclass(frozen=True)
class TextInstanceInput:
    hint: str

    def __post_init__(self):
        if not self.hint.split():
            raise ContractError("hint has no tokens")


@dataclass(frozen=True)
class ImageInstanceInput:
    stub_semantic: tuple
    mean_rgb: tuple
    normalized_pixel_count: float
    mean_uv: tuple

    def __post_init__(self):
        values = (*self.stub_semantic, *self.mean_rgb,
                  self.normalized_pixel_count, *self.mean_uv)
        if any(not math.isfinite(v) for v in values):
            raise NumericError("non-finite image instance input")
        if not (0.0 <= self.normalized_pixel_count <= 1.0):
            raise ContractError("normalized pixel count outside [0,1]")


@dataclass(frozen=True)
class PointInstanceInput:
    points: tuple  # ((x, y, z), ...) scene-local
    mean_rgb: tuple
    normalized_point_count: float
    mean_uv: tuple

    def __post_init__(self):
        if len(self.points) < 1:
            raise ContractError("point instance needs at least one point")


@dataclass(frozen=True)
class InstanceDescriptor:
    vec: tuple

    def __post_init__(self):
        norm = math.sqrt(sum(v * v for v in self.vec))
        if abs(norm - 1.0) > 1e-9:
            raise ContractError(f"descriptor norm {norm} != 1")


# -- parameter initialization ---------------------------------------------------


def init_text_branch(store: ParamStore, stub_dim: int, d: int,
                     seed_key: str) -> None:
    init_mlp3(store, "txib/mlp", (stub_dim, d, d, d), seed_key)


def init_image_branch(store: ParamStore, stub_dim: int, d: int,
                      seed_key: str) -> None:
    init_mlp3(store, "imib/sem", (stub_dim, d, d, d), seed_key)
    init_mlp3(store, "imib/color", (3, d, d, d), seed_key)
    init_mlp3(store, "imib/num", (1, d, d, d), seed_key)
    init_mlp3(store, "imib/uv", (2, d, d, d), seed_key)
    init_mlp3(store, "imib/fuse", (4 * d, d, d, d), seed_key)


def init_point_branch(store: ParamStore, d: int, seed_key: str) -> None:
    init_mlp3(store, "pcib/point", (3, d, d, d), seed_key)
    init_mlp3(store, "pcib/color", (3, d, d, d), seed_key)
    init_mlp3(store, "pcib/num", (1, d, d, d), seed_key)
    init_mlp3(store, "pcib/uv", (2, d, d, d), seed_key)
    init_mlp3(store, "pcib/proj", (4 * d, d, d, d), seed_key)


def branch_dims(store: ParamStore):
    """(stub_dim, D) as recorded in the registered weights."""
    for probe, key in (("txib/mlp/l0/W", "txib"), ("imib/sem/l0/W", "imib")):
        if probe in store:
            w = store.tensor(probe)
            return w.rows, w.cols
    raise ContractError("store holds neither a text nor an image branch")


# -- batched branch forward passes ------------------------------------------------


def text_batch(stubs, store: ParamStore) -> Value:
    """N stacked text stub vectors -> N unit-norm descriptors."""
    return tape.row_l2_normalize(mlp3_forward(as_value(stubs), "txib/mlp", store))


def _zeros_like_rows(n: int, d: int) -> Value:
    return constant(Matrix.zeros(n, d))


def image_batch(sem, color, num, uv, store: ParamStore,
                use_uv: bool = True) -> Value:
    """Four stacked per-instance features -> N unit-norm image descriptors."""
    sem = as_value(sem)
    n = sem.data.rows
    d = store.tensor("imib/sem/l2/W").cols
    parts = [
        mlp3_forward(sem, "imib/sem", store),
        mlp3_forward(as_value(color), "imib/color", store),
        mlp3_forward(as_value(num), "imib/num", store),
        mlp3_forward(as_value(uv), "imib/uv", store) if use_uv
        else _zeros_like_rows(n, d),
    ]
    fused = mlp3_forward(concat_cols(parts), "imib/fuse", store)
    return tape.row_l2_normalize(fused)


def point_semantic_batch(points, offsets, store: ParamStore) -> Value:
    """Per-point MLP then a column-wise max per instance segment."""
    h = mlp3_forward(as_value(points), "pcib/point", store)
    return tape.segment_colmax(h, offsets)


def point_batch(points, offsets, color, num, uv, store: ParamStore,
                use_uv: bool = True) -> Value:
    sem = point_semantic_batch(points, offsets, store)
    n = sem.data.rows
    d = store.tensor("pcib/point/l2/W").cols
    parts = [
        sem,
        mlp3_forward(as_value(color), "pcib/color", store),
        mlp3_forward(as_value(num), "pcib/num", store),
        mlp3_forward(as_value(uv), "pcib/uv", store) if use_uv
        else _zeros_like_rows(n, d),
    ]
    fused = mlp3_forward(concat_cols(parts), "pcib/proj", store)
    return tape.row_l2_normalize(fused)


# -- input marshalling -------------------------------------------------------------


def centered_points(points):
    """Points with their centroid subtracted (the point branch's local frame)."""
    n = len(points)
    cx = math.fsum(p[0] for p in points) / n
    cy = math.fsum(p[1] for p in points) / n
    cz = math.fsum(p[2] for p in points) / n
    return [(p[0] - cx, p[1] - cy, p[2] - cz) for p in points]


def points_matrix(points) -> Matrix:
    flat = array("d")
    for (x, y, z) in points:
        flat.append(x)
        flat.append(y)
        flat.append(z)
    return Matrix(len(points), 3, flat)


def text_input_from_record(record, use_uv: bool = True) -> TextInstanceInput:
    from .scenegen.hints import strip_position

    hint = record.hint if use_uv else strip_position(record.hint)
    return TextInstanceInput(hint)


def image_input_from_record(record, pixel_norm: float) -> ImageInstanceInput:
    return ImageInstanceInput(
        stub_semantic=tuple(record.stub_image_vec),
        mean_rgb=tuple(record.instance3d.color_rgb),
        normalized_pixel_count=min(1.0, record.pixel_count / pixel_norm),
        mean_uv=tuple(record.mean_uv),
    )


def point_input_from_record(record, point_norm: float) -> PointInstanceInput:
    pts = record.instance3d.points
    return PointInstanceInput(
        points=tuple(pts),
        mean_rgb=tuple(record.instance3d.color_rgb),
        normalized_point_count=min(1.0, len(pts) / point_norm),
        mean_uv=tuple(record.mean_uv),
    )


# -- single-instance wrappers ---------------------------------------------------------


def _descriptor(value: Value) -> InstanceDescriptor:
    return InstanceDescriptor(tuple(value.data.data))


def encode_text_instance(inp: TextInstanceInput,
                         store: ParamStore) -> InstanceDescriptor:
    stub_dim = store.tensor("txib/mlp/l0/W").rows
    stub = stub_embed(inp.hint.split(), "text", stub_dim)
    return _descriptor(text_batch(Matrix.row_vector(stub), store))


def encode_image_instance(inp: ImageInstanceInput, store: ParamStore,
                          use_uv: bool = True) -> InstanceDescriptor:
    out = image_batch(
        Matrix.row_vector(inp.stub_semantic),
        Matrix.row_vector(inp.mean_rgb),
        Matrix.row_vector([inp.normalized_pixel_count]),
        Matrix.row_vector(inp.mean_uv),
        store,
        use_uv=use_uv,
    )
    return _descriptor(out)


def point_semantic_encode(points, store: ParamStore):
    """Permutation-invariant set feature of one instance's points."""
    points = list(points)
    if not points:
        raise ContractError("point set is empty")
    mat = points_matrix(centered_points(points))
    out = point_semantic_batch(mat, array("q", [0, len(points)]), store)
    return list(out.data.data)


def encode_point_instance(inp: PointInstanceInput, store: ParamStore,
                          use_uv: bool = True) -> InstanceDescriptor:
    mat = points_matrix(centered_points(list(inp.points)))
    out = point_batch(
        mat,
        array("q", [0, len(inp.points)]),
        Matrix.row_vector(inp.mean_rgb),
        Matrix.row_vector([inp.normalized_point_count]),
        Matrix.row_vector(inp.mean_uv),
        store,
        use_uv=use_uv,
    )
    return _descriptor(out)
