"""Descriptor databases, exhaustive top-k search, and Recall@k evaluation.

Search is exact: every query scores against every database row by cosine
similarity (rows are unit-norm, so dot product), ties broken by ascending
scene id. Two correctness criteria exist: a geographic distance threshold and
exact-location (same scene id) matching.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

from .errors import (
    ConfigError,
    ContractError,
    DataError,
    DegenerateSceneError,
    EmptySceneError,
)
from .model import MODALITIES, SceneEncoder
from .numcore import Matrix
from .numcore.backend import kernels as K

TASKS = ("T2I", "I2T", "T2P", "P2T", "I2P", "P2I", "I2I", "P2P")
CROSS_TASKS = ("T2I", "I2T", "T2P", "P2T", "I2P", "P2I")
UNI_TASKS = ("I2I", "P2P")

_MODALITY_CODE = {"T": "text", "I": "image", "P": "point"}


@dataclass(frozen=True)
class Criterion:
    """Correctness rule for a retrieved entry."""

    kind: str  # "distance" or "exact"
    d: float = 0.0

    def __post_init__(self):
        if self.kind not in ("distance", "exact"):
            raise ConfigError(f"unknown criterion {self.kind!r}")
        if self.kind == "distance" and self.d <= 0:
            raise ConfigError("distance criterion needs a positive threshold")

    @classmethod
    def distance(cls, d: float) -> "Criterion":
        return cls("distance", float(d))

    @classmethod
    def exact(cls) -> "Criterion":
        return cls("exact")

    def passes(self, query, entry_id: int, entry_location) -> bool:
        if self.kind == "exact":
            return entry_id == query.scene_id
        return math.dist(query.location, entry_location) <= self.d


@dataclass(frozen=True)
class Query:
    vec: tuple
    scene_id: int
    location: tuple


@dataclass(frozen=True)
class DescriptorDB:
    modality: str
    ids: tuple
    locations: tuple
    vectors: Matrix
    skipped: tuple = ()

    def __post_init__(self):
        if not (len(self.ids) == len(self.locations) == self.vectors.rows):
            raise ContractError("db columns are not parallel")
        if len(set(self.ids)) != len(self.ids):
            raise ContractError("duplicate scene ids in db")

    @property
    def size(self) -> int:
        return len(self.ids)


@dataclass(frozen=True)
class RecallReport:
    task: str
    criterion: Criterion
    recalls: dict  # k -> fraction in [0, 1]
    num_queries: int
    db_size: int
    skipped: int = 0

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "criterion": ("exactLocation" if self.criterion.kind == "exact"
                          else "distanceThreshold"),
            "d": self.criterion.d if self.criterion.kind == "distance" else None,
            "recalls": {str(k): v for k, v in sorted(self.recalls.items())},
            "numQueries": self.num_queries,
            "M": self.db_size,
            "skipped": self.skipped,
        }


def build_db(scenes, modality: str, checkpoint, hints: int = None,
             hint_seed: int = None) -> DescriptorDB:
    """Scene descriptors for one modality over a scene list."""
    if modality not in MODALITIES:
        raise ConfigError(f"unknown modality {modality!r}")
    scenes = list(scenes)
    if not scenes:
        raise DataError("empty scene list")
    encoder = SceneEncoder(checkpoint.params, checkpoint.config)
    try:
        mat = encoder.descriptor_matrix(scenes, modality, hints=hints,
                                        hint_seed=hint_seed)
        return DescriptorDB(
            modality,
            tuple(s.scene_id for s in scenes),
            tuple(tuple(s.location) for s in scenes),
            mat,
        )
    except (DegenerateSceneError, EmptySceneError):
        pass  # isolate the offending scene(s) below

    ids, locations, rows, skipped = [], [], [], []
    for scene in scenes:
        try:
            mat = encoder.descriptor_matrix([scene], modality, hints=hints,
                                            hint_seed=hint_seed)
        except (DegenerateSceneError, EmptySceneError) as exc:
            warnings.warn(
                f"skipping scene {scene.scene_id} ({modality}): {exc}",
                stacklevel=2,
            )
            skipped.append(scene.scene_id)
            continue
        ids.append(scene.scene_id)
        locations.append(tuple(scene.location))
        rows.append(mat)
    if not rows:
        raise DataError(f"no usable scenes for modality {modality}")
    from .numcore.matrix import concat_rows

    return DescriptorDB(modality, tuple(ids), tuple(locations),
                        concat_rows(rows), tuple(skipped))


def queries_from_db(db: DescriptorDB):
    return [
        Query(tuple(db.vectors.row(i)), db.ids[i], db.locations[i])
        for i in range(db.size)
    ]


def _scores(db: DescriptorDB, vec) -> list:
    q = Matrix.column_vector(vec)
    return list(K.matmul(db.vectors, q).data)


def query_topk(db: DescriptorDB, vec, k: int):
    """Top-k (scene id, cosine score), exhaustive and exact."""
    if k < 1:
        raise ConfigError(f"k must be >= 1, got {k}")
    if db.size == 0:
        raise DataError("empty descriptor db")
    scores = _scores(db, vec)
    order = sorted(range(db.size), key=lambda i: (-scores[i], db.ids[i]))
    return [(db.ids[i], scores[i]) for i in order[: min(k, db.size)]]


def recall_at_k(queries, db: DescriptorDB, ks, criterion: Criterion,
                exclude_self: bool = False, task: str = "") -> RecallReport:
    """Fraction of queries whose top-k contains a correct entry, per k."""
    queries = list(queries)
    if not queries:
        raise DataError("no queries")
    ks = sorted(set(int(k) for k in ks))
    if ks[0] < 1:
        raise ConfigError("ranks must be positive")
    hits = {k: 0 for k in ks}
    for query in queries:
        scores = _scores(db, query.vec)
        candidates = [
            i for i in range(db.size)
            if not (exclude_self and db.ids[i] == query.scene_id)
        ]
        if not candidates:
            raise DataError("query has an empty candidate set")
        candidates.sort(key=lambda i: (-scores[i], db.ids[i]))
        best_rank = None
        for rank, i in enumerate(candidates, start=1):
            if criterion.passes(query, db.ids[i], db.locations[i]):
                best_rank = rank
                break
        for k in ks:
            if best_rank is not None and best_rank <= k:
                hits[k] += 1
    n = len(queries)
    return RecallReport(
        task=task,
        criterion=criterion,
        recalls={k: hits[k] / n for k in ks},
        num_queries=n,
        db_size=db.size,
        skipped=len(db.skipped),
    )


def run_task_matrix(checkpoint, scenes, d: float = 20.0, ks=(1, 3, 5),
                    hints: int = None, hint_seed: int = None) -> dict:
    """All eight retrieval tasks over one scene list.

    Text-involving tasks use the exact-location criterion; image/point tasks
    use the distance threshold; the uni-modal tasks drop the query itself
    from the database.
    """
    scenes = list(scenes)
    if not scenes:
        raise DataError("empty scene list")
    dbs = {
        m: build_db(scenes, m, checkpoint, hints=hints, hint_seed=hint_seed)
        for m in MODALITIES
    }
    queries = {m: queries_from_db(dbs[m]) for m in MODALITIES}

    reports = {}
    for task in TASKS:
        q_mod = _MODALITY_CODE[task[0]]
        db_mod = _MODALITY_CODE[task[2]]
        exact = "T" in task
        criterion = Criterion.exact() if exact else Criterion.distance(d)
        reports[task] = recall_at_k(
            queries[q_mod],
            dbs[db_mod],
            ks,
            criterion,
            exclude_self=task in UNI_TASKS,
            task=task,
        )
    return reports


def dump_embeddings(checkpoint, scenes, path, hints: int = None,
                    hint_seed: int = None) -> int:
    """CSV of every scene descriptor: sceneId, modality, x, y, v_0..v_{D-1}."""
    scenes = list(scenes)
    if not scenes:
        raise DataError("empty scene list")
    encoder = SceneEncoder(checkpoint.params, checkpoint.config)
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        d = checkpoint.config.d
        header = ["sceneId", "modality", "x", "y"]
        header += [f"v_{i}" for i in range(d)]
        fh.write(",".join(header) + "\n")
        for modality in MODALITIES:
            mat = encoder.descriptor_matrix(scenes, modality, hints=hints,
                                            hint_seed=hint_seed)
            for i, scene in enumerate(scenes):
                row = [str(scene.scene_id), modality,
                       format(scene.location[0], ".17g"),
                       format(scene.location[1], ".17g")]
                row += [format(v, ".17g") for v in mat.row(i)]
                fh.write(",".join(row) + "\n")
                count += 1
    return count
