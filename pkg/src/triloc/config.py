"""Run configuration: training hyperparameters and config-file parsing.

JSON config files have a versioned schema with ``world``, ``train``, and
``eval`` sections; unknown keys anywhere are rejected so typos fail loudly.
CLI flags override file values, which override defaults.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass

from .errors import ConfigError
from .scenegen.world import WorldConfig

CONFIG_VERSION = 1

POOL_MODES = ("sap", "max")


@dataclass(frozen=True)
class TrainConfig:
    d: int = 64
    lr_base: float = 5e-4
    epochs_instance: int = 20
    epochs_scene: int = 20
    batch_instance: int = 256
    batch_scene: int = 32  # desk-scale default; 64 matches the larger setup
    tau: float = 0.1
    alpha: float = 0.3
    hints_per_scene: int = 6
    seed: int = 0
    sap_depth_text: int = 1
    sap_depth_image: int = 2
    sap_depth_point: int = 2
    heads: int = 4
    ffn_hidden: int = 0  # 0 -> 2 * d
    pixel_count_norm: float = 400.0
    point_count_norm: float = 400.0
    pool: str = "sap"
    use_uv: bool = True
    eval_hint_seed: int = 0

    def __post_init__(self):
        positive = (
            ("d", self.d), ("lr_base", self.lr_base),
            ("epochs_instance", self.epochs_instance),
            ("epochs_scene", self.epochs_scene),
            ("batch_instance", self.batch_instance),
            ("batch_scene", self.batch_scene), ("tau", self.tau),
            ("hints_per_scene", self.hints_per_scene),
            ("heads", self.heads),
            ("pixel_count_norm", self.pixel_count_norm),
            ("point_count_norm", self.point_count_norm),
        )
        for name, value in positive:
            if value <= 0:
                raise ConfigError(f"{name} must be positive, got {value}")
        if not (0.0 <= self.alpha <= 1.0):
            raise ConfigError(f"alpha must lie in [0,1], got {self.alpha}")
        if self.d % self.heads != 0:
            raise ConfigError(
                f"d={self.d} must be divisible by heads={self.heads}"
            )
        if self.pool not in POOL_MODES:
            raise ConfigError(f"pool must be one of {POOL_MODES}")
        for name in ("sap_depth_text", "sap_depth_image", "sap_depth_point"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")

    @property
    def ffn(self) -> int:
        return self.ffn_hidden if self.ffn_hidden > 0 else 2 * self.d

    def sap_depth(self, modality: str) -> int:
        return {
            "text": self.sap_depth_text,
            "image": self.sap_depth_image,
            "point": self.sap_depth_point,
        }[modality]

    def replace(self, **kwargs) -> "TrainConfig":
        return dataclasses.replace(self, **kwargs)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class EvalConfig:
    d: float = 20.0
    ks: tuple = (1, 3, 5)
    hints: int = 6
    hint_seed: int = 0
    split: str = "test"

    def __post_init__(self):
        if self.d <= 0:
            raise ConfigError("distance threshold must be positive")
        if not self.ks or any(k < 1 for k in self.ks):
            raise ConfigError("ks must be positive ranks")
        if self.hints < 1:
            raise ConfigError("hints must be >= 1")
        if self.split not in ("train", "val", "test"):
            raise ConfigError(f"unknown split {self.split!r}")

    def replace(self, **kwargs) -> "EvalConfig":
        return dataclasses.replace(self, **kwargs)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["ks"] = list(self.ks)
        return d


@dataclass(frozen=True)
class RunConfig:
    world: WorldConfig
    train: TrainConfig
    eval: EvalConfig

    def to_dict(self) -> dict:
        w = dataclasses.asdict(self.world)
        w["instances_per_scene"] = list(self.world.instances_per_scene)
        w["split_fractions"] = list(self.world.split_fractions)
        return {
            "version": CONFIG_VERSION,
            "world": w,
            "train": self.train.to_dict(),
            "eval": self.eval.to_dict(),
        }


def _build_section(cls, payload: dict, section: str, tuple_fields=()):
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(payload) - known
    if unknown:
        raise ConfigError(
            f"unknown key(s) in '{section}' section: {sorted(unknown)}"
        )
    coerced = dict(payload)
    for name in tuple_fields:
        if name in coerced:
            coerced[name] = tuple(coerced[name])
    try:
        return cls(**coerced)
    except TypeError as exc:
        raise ConfigError(f"bad '{section}' section: {exc}") from None


def run_config_from_dict(payload: dict) -> RunConfig:
    if not isinstance(payload, dict):
        raise ConfigError("config root must be a JSON object")
    unknown = set(payload) - {"version", "world", "train", "eval"}
    if unknown:
        raise ConfigError(f"unknown top-level key(s): {sorted(unknown)}")
    version = payload.get("version", CONFIG_VERSION)
    if version != CONFIG_VERSION:
        raise ConfigError(f"unsupported config version {version}")
    world_d = dict(payload.get("world", {}))
    if "num_scenes" not in world_d:
        world_d.setdefault("num_scenes", 60)
    world = _build_section(WorldConfig, world_d, "world",
                           tuple_fields=("instances_per_scene",
                                         "split_fractions"))
    train = _build_section(TrainConfig, dict(payload.get("train", {})),
                           "train")
    ev = _build_section(EvalConfig, dict(payload.get("eval", {})), "eval",
                        tuple_fields=("ks",))
    return RunConfig(world, train, ev)


def load_run_config(path) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    return run_config_from_dict(payload)
