"""Two-stage training: instance-level pretraining, then scene-level matching.

Stage one trains two separate instance-alignment models, each anchored on the
image branch: image-text and image-point. Stage two builds the scene model by
transferring the image and text branches from the image-text checkpoint and
the point branch from the image-point checkpoint, adds fresh attention
pooling, and optimizes the weighted scene-level contrastive objective.

Every run is a deterministic function of (dataset, config, seed).
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field

from .config import TrainConfig
from .errors import ConfigError, ContractError, DataError
from .instance import (
    init_image_branch,
    init_point_branch,
    init_text_branch,
)
from .loss import batch_contrastive_value, combined_scene_loss_value
from .model import (
    image_instance_rows,
    init_scene_model_params,
    point_instance_rows,
    scene_descriptor_rows,
    select_text_hints,
    text_instance_rows,
)
from .numcore import AdamState, adam_step, lr_at_epoch
from .numcore.params import ParamStore
from .numcore.tape import backward

STAGE_IT = "instanceIT"
STAGE_IP = "instanceIP"
STAGE_SCENE = "scene"
STAGES = (STAGE_IT, STAGE_IP, STAGE_SCENE)

_STAGE_PREFIXES = {
    STAGE_IT: ("txib/", "imib/"),
    STAGE_IP: ("imib/", "pcib/"),
    STAGE_SCENE: ("txib/", "imib/", "pcib/", "sap/"),
}


@dataclass
class Checkpoint:
    params: ParamStore
    config: TrainConfig
    epoch: int
    stage: str
    metrics: list = field(default_factory=list)

    def __post_init__(self):
        if self.stage not in STAGES:
            raise ConfigError(f"unknown stage {self.stage!r}")
        for prefix in _STAGE_PREFIXES[self.stage]:
            if not any(p.startswith(prefix) for p in self.params.paths()):
                raise ContractError(
                    f"{self.stage} checkpoint misses parameters under "
                    f"{prefix!r}"
                )

    def save(self, path) -> None:
        path = str(path)
        self.params.save(path)
        sidecar = {
            "config": self.config.to_dict(),
            "epoch": self.epoch,
            "stage": self.stage,
            "metrics": self.metrics,
        }
        with open(path + ".json", "w", encoding="utf-8") as fh:
            json.dump(sidecar, fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "Checkpoint":
        path = str(path)
        params = ParamStore.load(path)
        with open(path + ".json", "r", encoding="utf-8") as fh:
            sidecar = json.load(fh)
        cfg_dict = dict(sidecar["config"])
        config = TrainConfig(**cfg_dict)
        return cls(params, config, sidecar["epoch"], sidecar["stage"],
                   sidecar.get("metrics", []))


def _train_split(scenes):
    train = [s for s in scenes if s.split == "train"]
    if not train:
        raise DataError("train split is empty")
    return train


def _stub_dim(scenes) -> int:
    return len(scenes[0].instances[0].stub_text_vec)


def _batches(indices, batch_size):
    for i in range(0, len(indices), batch_size):
        chunk = indices[i : i + batch_size]
        if len(chunk) >= 2:  # a single pair has no negatives
            yield chunk


def _write_log(log_path, record) -> None:
    if log_path is None:
        return
    with open(log_path, "a", encoding="utf-8") as fh:
        fh.write(json.dumps(record, sort_keys=True) + "\n")


# -- stage one -------------------------------------------------------------------


def _pretrain_one(scenes, cfg: TrainConfig, stage: str, log_path=None,
                  progress=None) -> Checkpoint:
    train = _train_split(scenes)
    stub_dim = _stub_dim(train)
    store = ParamStore()
    if stage == STAGE_IT:
        seed_key = f"{cfg.seed}/it"
        init_text_branch(store, stub_dim, cfg.d, seed_key)
        init_image_branch(store, stub_dim, cfg.d, seed_key)
    elif stage == STAGE_IP:
        seed_key = f"{cfg.seed}/ip"
        init_image_branch(store, stub_dim, cfg.d, seed_key)
        init_point_branch(store, cfg.d, seed_key)
    else:
        raise ConfigError(f"not an instance stage: {stage}")

    records = [rec for scene in train for rec in scene.instances]
    state = AdamState(store)
    rng = random.Random(f"pretrain|{stage}|{cfg.seed}")
    metrics = []
    for epoch in range(cfg.epochs_instance):
        order = list(range(len(records)))
        rng.shuffle(order)
        lr = lr_at_epoch(epoch, cfg.lr_base)
        total, nb = 0.0, 0
        for batch in _batches(order, cfg.batch_instance):
            chosen = [records[i] for i in batch]
            img = image_instance_rows(chosen, store, cfg)
            other = (text_instance_rows(chosen, store, cfg)
                     if stage == STAGE_IT
                     else point_instance_rows(chosen, store, cfg))
            loss = batch_contrastive_value(img, other, cfg.tau)
            backward(loss)
            adam_step(store, state, lr)
            total += loss.item()
            nb += 1
        record = {"stage": stage, "epoch": epoch, "lr": lr,
                  "loss": total / max(nb, 1)}
        metrics.append(record)
        _write_log(log_path, record)
        if progress:
            progress(record)
    return Checkpoint(store, cfg, cfg.epochs_instance - 1, stage, metrics)


def pretrain_instance_models(scenes, cfg: TrainConfig, log_path=None,
                             progress=None):
    """Train the image-text and image-point instance models; returns both."""
    ckpt_it = _pretrain_one(scenes, cfg, STAGE_IT, log_path, progress)
    ckpt_ip = _pretrain_one(scenes, cfg, STAGE_IP, log_path, progress)
    return ckpt_it, ckpt_ip


# -- stage two --------------------------------------------------------------------


def build_scene_store(stub_dim: int, cfg: TrainConfig,
                      pretrained=None) -> ParamStore:
    """Fresh scene-model parameters, with the branch-transfer rule applied.

    The image and text branches come from the image-text checkpoint, the
    point branch from the image-point checkpoint; attention pooling is always
    freshly initialized.
    """
    store = ParamStore()
    init_scene_model_params(store, stub_dim, cfg, f"{cfg.seed}/scene")
    if pretrained is not None:
        ckpt_it, ckpt_ip = pretrained
        for ckpt in (ckpt_it, ckpt_ip):
            if ckpt.config.d != cfg.d:
                raise ConfigError(
                    f"checkpoint dimension {ckpt.config.d} != configured "
                    f"{cfg.d}"
                )
        store.copy_prefix_from(ckpt_it.params, "txib/")
        store.copy_prefix_from(ckpt_it.params, "imib/")
        store.copy_prefix_from(ckpt_ip.params, "pcib/")
    return store


def train_scene_model(scenes, cfg: TrainConfig, pretrained=None,
                      log_path=None, progress=None,
                      eval_every_epoch: bool = True) -> Checkpoint:
    """Scene-level training; ``pretrained`` is the (image-text, image-point)
    checkpoint pair, or None to start from fresh branches."""
    train = _train_split(scenes)
    val = [s for s in scenes if s.split == "val"]
    stub_dim = _stub_dim(train)

    store = build_scene_store(stub_dim, cfg, pretrained)

    state = AdamState(store)
    rng = random.Random(f"scene|{cfg.seed}")
    metrics = []
    best = None  # (avg_r1, epoch, params clone)
    for epoch in range(cfg.epochs_scene):
        order = list(range(len(train)))
        rng.shuffle(order)
        lr = lr_at_epoch(epoch, cfg.lr_base)
        hint_seed = cfg.seed * 10007 + epoch
        total, nb = 0.0, 0
        for batch in _batches(order, cfg.batch_scene):
            chosen = [train[i] for i in batch]
            f_img = scene_descriptor_rows(chosen, "image", store, cfg)
            if cfg.alpha > 0.0:
                f_txt = scene_descriptor_rows(chosen, "text", store, cfg,
                                              hint_seed=hint_seed)
                l_it = batch_contrastive_value(f_img, f_txt, cfg.tau)
            else:
                l_it = None
            if cfg.alpha < 1.0:
                f_pts = scene_descriptor_rows(chosen, "point", store, cfg)
                l_ip = batch_contrastive_value(f_img, f_pts, cfg.tau)
            else:
                l_ip = None
            if l_it is None:
                loss = l_ip
            elif l_ip is None:
                loss = l_it
            else:
                loss = combined_scene_loss_value(l_it, l_ip, cfg.alpha)
            backward(loss)
            adam_step(store, state, lr)
            total += loss.item()
            nb += 1

        record = {"stage": STAGE_SCENE, "epoch": epoch, "lr": lr,
                  "loss": total / max(nb, 1)}
        if val and eval_every_epoch:
            snapshot = Checkpoint(store, cfg, epoch, STAGE_SCENE)
            reports = evaluate_epoch(snapshot, val)
            avg_r1 = average_cross_r1(reports)
            record["val_avg_r1"] = avg_r1
            record["per_task_r1"] = {
                task: rep.recalls[min(rep.recalls)]
                for task, rep in reports.items()
            }
            if best is None or avg_r1 > best[0]:
                best = (avg_r1, epoch, store.clone())
        metrics.append(record)
        _write_log(log_path, record)
        if progress:
            progress(record)

    if best is not None:
        final_params, final_epoch = best[2], best[1]
    else:
        final_params, final_epoch = store, cfg.epochs_scene - 1
    return Checkpoint(final_params, cfg, final_epoch, STAGE_SCENE, metrics)


def run_training(scenes, cfg: TrainConfig, stage: str = "both",
                 no_pretrain: bool = False, log_path=None, progress=None):
    """End-to-end convenience wrapper used by the CLI.

    Returns (image-text ckpt | None, image-point ckpt | None, scene ckpt | None).
    """
    if stage not in ("instance", "scene", "both"):
        raise ConfigError(f"unknown training stage {stage!r}")
    ckpt_it = ckpt_ip = ckpt_scene = None
    if stage in ("instance", "both"):
        ckpt_it, ckpt_ip = pretrain_instance_models(scenes, cfg, log_path,
                                                    progress)
    if stage in ("scene", "both"):
        pretrained = None
        if not no_pretrain:
            if ckpt_it is None or ckpt_ip is None:
                ckpt_it, ckpt_ip = pretrain_instance_models(
                    scenes, cfg, log_path, progress
                )
            pretrained = (ckpt_it, ckpt_ip)
        ckpt_scene = train_scene_model(scenes, cfg, pretrained, log_path,
                                       progress)
    return ckpt_it, ckpt_ip, ckpt_scene


# -- evaluation hooks ---------------------------------------------------------------


def evaluate_epoch(checkpoint: Checkpoint, scenes, d: float = 20.0,
                   ks=(1, 3, 5), hints=None, hint_seed=None):
    """Retrieval reports over one scene list (validation hook)."""
    from .retrieval import run_task_matrix

    return run_task_matrix(checkpoint, scenes, d=d, ks=ks, hints=hints,
                           hint_seed=hint_seed)


def average_cross_r1(reports) -> float:
    from .retrieval import CROSS_TASKS

    r1s = []
    for task in CROSS_TASKS:
        rep = reports[task]
        r1s.append(rep.recalls[min(rep.recalls)])
    return sum(r1s) / len(r1s)


# -- gradient audit -------------------------------------------------------------


def gradient_audit(seed: int = 3, d: int = 8, stub_dim: int = 8, v: int = 3,
                   n: int = 2, max_entries_per_param=None,
                   alpha: float = 0.3) -> dict:
    """Finite-difference check of the full scene-loss graph.

    Builds ``n`` synthetic scenes of ``v`` instances each, runs all three
    branches, the attention pooling stacks, and the combined contrastive
    loss, and returns the per-parameter worst relative gradient error.
    """
    import math

    from .numcore.gradcheck import grad_check
    from .scene import scene_vector_value
    from .scenegen.world import Instance3D, InstanceRecord
    from .numcore.tape import concat_rows, slice_rows

    rng = random.Random(f"audit|{seed}")
    cfg = TrainConfig(d=d, heads=4 if d % 4 == 0 else 1, seed=seed)
    store = ParamStore()
    init_scene_model_params(store, stub_dim, cfg, f"audit/{seed}")

    def rand_vec(k, lo=-1.0, hi=1.0):
        return tuple(rng.uniform(lo, hi) for _ in range(k))

    def rand_unit(k):
        vec = [rng.gauss(0, 1) for _ in range(k)]
        norm = math.sqrt(sum(x * x for x in vec)) or 1.0
        return tuple(x / norm for x in vec)

    scenes = []
    next_id = 0
    for _ in range(n):
        records = []
        for _ in range(v):
            pts = tuple(
                (rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(0, 4))
                for _ in range(4)
            )
            records.append(
                InstanceRecord(
                    instance3d=Instance3D(next_id, "pole", pts,
                                          (0.3, 0.5, 0.7)),
                    mean_uv=(rng.random(), rng.random()),
                    pixel_count=rng.randint(5, 50),
                    hint="the gray pole is at the top left",
                    stub_text_vec=rand_unit(stub_dim),
                    stub_image_vec=rand_unit(stub_dim),
                )
            )
            next_id += 1
        scenes.append(records)

    mask = (True,) * v

    def loss_fn():
        flat = [rec for records in scenes for rec in records]
        rows = {
            "text": text_instance_rows(flat, store, cfg),
            "image": image_instance_rows(flat, store, cfg),
            "point": point_instance_rows(flat, store, cfg),
        }
        descriptors = {}
        for modality, inst in rows.items():
            per_scene = []
            for i in range(n):
                block = slice_rows(inst, i * v, (i + 1) * v)
                per_scene.append(
                    scene_vector_value(block, mask, store, modality,
                                       heads=cfg.heads)
                )
            descriptors[modality] = concat_rows(per_scene)
        l_it = batch_contrastive_value(descriptors["image"],
                                       descriptors["text"], cfg.tau)
        l_ip = batch_contrastive_value(descriptors["image"],
                                       descriptors["point"], cfg.tau)
        return combined_scene_loss_value(l_it, l_ip, alpha)

    return grad_check(loss_fn, store, seed=seed,
                      max_entries_per_param=max_entries_per_param)


__all__ = [
    "Checkpoint",
    "STAGE_IP",
    "STAGE_IT",
    "STAGE_SCENE",
    "average_cross_r1",
    "build_scene_store",
    "evaluate_epoch",
    "gradient_audit",
    "pretrain_instance_models",
    "run_training",
    "select_text_hints",
    "train_scene_model",
]
