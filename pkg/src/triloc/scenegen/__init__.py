"""Synthetic geo-tagged scene generation across text, image, and points."""

from .camera import (
    CameraModel,
    instance_uv_stats,
    make_camera,
    project_point,
    visible_subset,
)
from .dataset_io import read_dataset, write_dataset
from .hints import color_name, make_hint, region_label, strip_position
from .stubs import stub_embed
from .world import (
    CATEGORIES,
    Instance3D,
    InstanceRecord,
    SceneTriplet,
    WorldConfig,
    generate_world,
    split_scenes,
)

__all__ = [
    "CATEGORIES",
    "CameraModel",
    "Instance3D",
    "InstanceRecord",
    "SceneTriplet",
    "WorldConfig",
    "color_name",
    "generate_world",
    "instance_uv_stats",
    "make_camera",
    "make_hint",
    "project_point",
    "read_dataset",
    "region_label",
    "split_scenes",
    "strip_position",
    "stub_embed",
    "visible_subset",
    "write_dataset",
]
