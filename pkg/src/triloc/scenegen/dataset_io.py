"""Dataset persistence: one scene triplet per JSONL line.

Floats are serialized with 17 significant digits, which round-trips float64
exactly, so write -> read is the identity and same-seed runs produce
byte-identical files.
"""

from __future__ import annotations

import json
import math

from ..errors import DataError, DatasetParseError
from .camera import CameraModel
from .world import Instance3D, InstanceRecord, SceneTriplet


def _fmt(x: float) -> str:
    if not math.isfinite(x):
        raise DatasetParseError(f"non-finite float {x!r} in dataset")
    return format(float(x), ".17g")


def _json(obj) -> str:
    if isinstance(obj, float):
        return _fmt(obj)
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        inner = ",".join(f"{json.dumps(k)}:{_json(v)}" for k, v in obj.items())
        return "{" + inner + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(_json(v) for v in obj) + "]"
    raise DatasetParseError(f"unserializable value {obj!r}")


def _scene_to_dict(scene: SceneTriplet) -> dict:
    cam = scene.camera
    return {
        "scene_id": scene.scene_id,
        "split": scene.split,
        "location": list(scene.location),
        "camera": {
            "pose": [list(row) for row in cam.pose],
            "fx": cam.fx,
            "fy": cam.fy,
            "cx": cam.cx,
            "cy": cam.cy,
            "width": cam.width,
            "height": cam.height,
        },
        "instances": [
            {
                "instance_id": rec.instance3d.instance_id,
                "category": rec.instance3d.category,
                "color_rgb": list(rec.instance3d.color_rgb),
                "points": [list(p) for p in rec.instance3d.points],
                "mean_uv": list(rec.mean_uv),
                "pixel_count": rec.pixel_count,
                "hint": rec.hint,
                "stub_text_vec": list(rec.stub_text_vec),
                "stub_image_vec": list(rec.stub_image_vec),
            }
            for rec in scene.instances
        ],
    }


def _scene_from_dict(d: dict) -> SceneTriplet:
    cam = d["camera"]
    camera = CameraModel(
        pose=tuple(tuple(map(float, row)) for row in cam["pose"]),
        fx=float(cam["fx"]),
        fy=float(cam["fy"]),
        cx=float(cam["cx"]),
        cy=float(cam["cy"]),
        width=int(cam["width"]),
        height=int(cam["height"]),
    )
    records = []
    for inst in d["instances"]:
        records.append(
            InstanceRecord(
                instance3d=Instance3D(
                    instance_id=int(inst["instance_id"]),
                    category=inst["category"],
                    points=tuple(tuple(map(float, p)) for p in inst["points"]),
                    color_rgb=tuple(map(float, inst["color_rgb"])),
                ),
                mean_uv=tuple(map(float, inst["mean_uv"])),
                pixel_count=int(inst["pixel_count"]),
                hint=inst["hint"],
                stub_text_vec=tuple(map(float, inst["stub_text_vec"])),
                stub_image_vec=tuple(map(float, inst["stub_image_vec"])),
            )
        )
    return SceneTriplet(
        scene_id=int(d["scene_id"]),
        location=tuple(map(float, d["location"])),
        camera=camera,
        instances=tuple(records),
        split=d["split"],
    )


def write_dataset(scenes, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for scene in scenes:
            fh.write(_json(_scene_to_dict(scene)))
            fh.write("\n")


def read_dataset(path):
    scenes = []
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read dataset {path}: {exc}") from None
    with fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                if line.endswith("\n"):
                    continue  # ignore a blank terminator line
                break
            try:
                payload = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetParseError(f"invalid JSON ({exc.msg})",
                                        line=lineno) from None
            try:
                scenes.append(_scene_from_dict(payload))
            except (KeyError, TypeError, ValueError) as exc:
                raise DatasetParseError(f"bad record: {exc}",
                                        line=lineno) from None
            except Exception as exc:  # contract violations from the dataclasses
                raise DatasetParseError(str(exc), line=lineno) from None
    return scenes
