"""Deterministic synthetic street-scene worlds.

A world is a serpentine vehicle trajectory through a square area. Scenes sit a
few meters apart along the rows; static objects (buildings, poles, trees, ...)
are scattered in a corridor around the path and live in one persistent pool,
so neighboring scenes observe the same physical objects from different
viewpoints. Each scene records the instances visible to its forward-facing
camera, their projected UV statistics, a text hint per instance, and frozen
stub embeddings.

Everything is a pure function of (config, seed).
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

from ..errors import ConfigError, ContractError, GenerationError
from .camera import CameraModel, make_camera, visible_subset
from .hints import CATEGORY_PHRASES, color_name, make_hint
from .stubs import stub_embed

CATEGORIES = tuple(CATEGORY_PHRASES)

SPLITS = ("train", "val", "test")

# camera rig shared by every scene
CAM_WIDTH, CAM_HEIGHT = 1024, 320
CAM_FX = CAM_FY = 500.0
CAM_CX, CAM_CY = 512.0, 160.0
CAM_HEIGHT_M = 1.6

# trajectory layout; short steps keep consecutive scenes visually similar,
# which the 20 m distance-threshold retrieval relies on
ROW_SPACING = 80.0
ROW_MARGIN = 40.0
SCENE_STEP = (2.0, 6.0)
LATERAL_JITTER = 0.5

# smooth heading drift along each row (a gently curving road); nearby scenes
# share almost the same heading while distant stretches differ
YAW_DRIFT_AMPLITUDE = 0.15  # radians
YAW_DRIFT_WAVELENGTH = 60.0  # meters

# object pool layout; the corridor extends past the row ends so end-of-row
# cameras still look at shared objects
POOL_STEP = 7.0
POOL_LATERAL = (4.0, 32.0)
POOL_OVERHANG = 45.0
TOPUP_BEARING = 0.6  # radians around the camera axis
TOPUP_RANGE = (8.0, 32.0)
COLOR_JITTER = 0.08
APPEARANCE_STYLES = 997  # distinct per-object appearance tokens


@dataclass(frozen=True)
class Instance3D:
    instance_id: int
    category: str
    points: tuple  # ((x, y, z), ...) meters
    color_rgb: tuple

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise ContractError(f"unknown category {self.category!r}")
        if len(self.points) < 1:
            raise ContractError("instance needs at least one point")
        if any(not (0.0 <= c <= 1.0) for c in self.color_rgb):
            raise ContractError(f"color {self.color_rgb} outside [0,1]")


@dataclass(frozen=True)
class InstanceRecord:
    instance3d: Instance3D  # points in the scene-local frame
    mean_uv: tuple  # normalized (u, v) in [0,1]^2
    pixel_count: int  # visible projected points (pixel surrogate)
    hint: str
    stub_text_vec: tuple
    stub_image_vec: tuple

    def __post_init__(self):
        u, v = self.mean_uv
        if not (0.0 <= u <= 1.0 and 0.0 <= v <= 1.0):
            raise ContractError(f"mean UV ({u}, {v}) outside the unit square")
        if not self.hint:
            raise ContractError("empty hint")


@dataclass(frozen=True)
class SceneTriplet:
    scene_id: int
    location: tuple  # (x, y) meters
    camera: CameraModel
    instances: tuple  # InstanceRecord, ...
    split: str

    def __post_init__(self):
        if self.split not in SPLITS:
            raise ContractError(f"unknown split {self.split!r}")
        n = len(self.instances)
        if not (6 <= n <= 12):
            raise ContractError(f"scene {self.scene_id} has {n} instances")


@dataclass(frozen=True)
class WorldConfig:
    num_scenes: int
    area_extent: float = 640.0
    instances_per_scene: tuple = (6, 12)
    submap_radius: float = 40.0
    seed: int = 0
    split_fractions: tuple = (0.7, 0.1, 0.2)
    min_separation: float = 1.0
    stub_dim: int = 64
    min_visible_points: int = 5

    def __post_init__(self):
        if self.num_scenes < 1:
            raise ConfigError("num_scenes must be >= 1")
        if self.submap_radius <= 0:
            raise ConfigError("submap_radius must be positive")
        if self.min_separation <= 0:
            raise ConfigError("min_separation must be positive")
        lo, hi = self.instances_per_scene
        if not (6 <= lo <= hi <= 12):
            raise ConfigError(
                f"instances_per_scene {self.instances_per_scene} must lie in [6,12]"
            )
        if len(self.split_fractions) != 3 or any(f < 0 for f in self.split_fractions):
            raise ConfigError("split_fractions must be three non-negative values")
        if abs(sum(self.split_fractions) - 1.0) > 1e-9:
            raise ConfigError("split_fractions must sum to 1")
        if self.stub_dim <= 0 or self.min_visible_points < 1:
            raise ConfigError("stub_dim and min_visible_points must be positive")


# -- object shape library -----------------------------------------------------
# Per category: point-count range, sampling weight, color palette, and a
# builder emitting points in the object-local frame (origin on the ground).

def _box_shell(rng, n, w, d, h, z0=0.0):
    pts = []
    for _ in range(n):
        face = rng.randrange(5)  # 4 walls + roof
        if face == 0:
            pts.append((rng.uniform(-w, w), -d, z0 + rng.uniform(0, h)))
        elif face == 1:
            pts.append((rng.uniform(-w, w), d, z0 + rng.uniform(0, h)))
        elif face == 2:
            pts.append((-w, rng.uniform(-d, d), z0 + rng.uniform(0, h)))
        elif face == 3:
            pts.append((w, rng.uniform(-d, d), z0 + rng.uniform(0, h)))
        else:
            pts.append((rng.uniform(-w, w), rng.uniform(-d, d), z0 + h))
    return pts


def _cylinder(rng, n, radius, h, z0=0.0):
    pts = []
    for _ in range(n):
        a = rng.uniform(0.0, 2.0 * math.pi)
        pts.append((radius * math.cos(a), radius * math.sin(a),
                    z0 + rng.uniform(0.0, h)))
    return pts


def _ellipsoid_shell(rng, n, rx, ry, rz, z0):
    pts = []
    for _ in range(n):
        # rejection-free: normalize a gaussian triple onto the unit sphere
        gx, gy, gz = rng.gauss(0, 1), rng.gauss(0, 1), rng.gauss(0, 1)
        norm = math.sqrt(gx * gx + gy * gy + gz * gz) or 1.0
        pts.append((rx * gx / norm, ry * gy / norm, z0 + rz * gz / norm))
    return pts


def _build_building(rng, n):
    w, d = rng.uniform(4.0, 8.0), rng.uniform(3.0, 6.0)
    h = rng.uniform(7.0, 15.0)
    return _box_shell(rng, n, w, d, h)


def _build_pole(rng, n):
    return _cylinder(rng, n, rng.uniform(0.06, 0.15), rng.uniform(4.0, 8.0))


def _build_traffic_light(rng, n):
    h = rng.uniform(3.0, 5.0)
    n_head = max(8, n // 3)
    pts = _cylinder(rng, n - n_head, 0.08, h)
    pts += _box_shell(rng, n_head, 0.18, 0.18, 0.9, z0=h)
    return pts


def _build_fence(rng, n):
    return _box_shell(rng, n, rng.uniform(3.0, 7.0), 0.06,
                      rng.uniform(1.0, 1.8))


def _build_garage(rng, n):
    return _box_shell(rng, n, rng.uniform(1.6, 3.0), rng.uniform(1.6, 3.0),
                      rng.uniform(2.4, 3.4))


def _build_tree(rng, n):
    trunk_h = rng.uniform(2.0, 4.0)
    n_trunk = max(6, n // 4)
    r = rng.uniform(1.4, 2.8)
    pts = _cylinder(rng, n_trunk, rng.uniform(0.12, 0.3), trunk_h)
    pts += _ellipsoid_shell(rng, n - n_trunk, r, r, r * rng.uniform(0.9, 1.4),
                            z0=trunk_h + r * 0.8)
    return pts


def _build_lamp(rng, n):
    h = rng.uniform(4.0, 6.0)
    n_head = max(6, n // 4)
    pts = _cylinder(rng, n - n_head, 0.07, h)
    arm = rng.uniform(0.5, 1.0)
    pts += [(rng.uniform(0.0, arm), rng.uniform(-0.1, 0.1),
             h + rng.uniform(-0.15, 0.15)) for _ in range(n_head)]
    return pts


def _build_trash_bin(rng, n):
    return _cylinder(rng, n, rng.uniform(0.25, 0.45), rng.uniform(0.8, 1.2))


CATEGORY_SPECS = {
    "building": dict(points=(250, 300), weight=0.15, builder=_build_building,
                     palette=[(0.55, 0.55, 0.55), (0.88, 0.88, 0.88),
                              (0.58, 0.40, 0.22), (0.85, 0.15, 0.10)]),
    "pole": dict(points=(25, 40), weight=0.18, builder=_build_pole,
                 palette=[(0.45, 0.45, 0.45), (0.12, 0.12, 0.12)]),
    "trafficLight": dict(points=(40, 60), weight=0.10,
                         builder=_build_traffic_light,
                         palette=[(0.10, 0.10, 0.10), (0.90, 0.85, 0.10),
                                  (0.45, 0.45, 0.45)]),
    "fence": dict(points=(80, 120), weight=0.10, builder=_build_fence,
                  palette=[(0.58, 0.40, 0.22), (0.55, 0.55, 0.55),
                           (0.88, 0.88, 0.88)]),
    "garage": dict(points=(110, 150), weight=0.09, builder=_build_garage,
                   palette=[(0.55, 0.55, 0.55), (0.88, 0.88, 0.88),
                            (0.15, 0.20, 0.85)]),
    "tree": dict(points=(90, 140), weight=0.18, builder=_build_tree,
                 palette=[(0.15, 0.75, 0.20), (0.20, 0.85, 0.25),
                          (0.10, 0.65, 0.15)]),
    "lamp": dict(points=(28, 45), weight=0.11, builder=_build_lamp,
                 palette=[(0.45, 0.45, 0.45), (0.12, 0.12, 0.12),
                          (0.90, 0.85, 0.15)]),
    "trashBin": dict(points=(25, 40), weight=0.09, builder=_build_trash_bin,
                     palette=[(0.15, 0.70, 0.20), (0.10, 0.20, 0.85),
                              (0.45, 0.45, 0.45)]),
}


@dataclass
class _PoolObject:
    instance_id: int
    category: str
    color_rgb: tuple
    world_points: tuple
    position: tuple  # (x, y) of the local origin
    style_id: int  # intrinsic appearance, surrogate for visual detail


def _sample_category(rng):
    pick = rng.random()
    acc = 0.0
    for cat, spec in CATEGORY_SPECS.items():
        acc += spec["weight"]
        if pick < acc:
            return cat
    return next(reversed(CATEGORY_SPECS))


def _sample_color(rng, category):
    base = rng.choice(CATEGORY_SPECS[category]["palette"])
    return tuple(
        min(1.0, max(0.0, c + rng.uniform(-COLOR_JITTER, COLOR_JITTER)))
        for c in base
    )


def _spawn_object(rng, instance_id, x, y) -> _PoolObject:
    cat = _sample_category(rng)
    spec = CATEGORY_SPECS[cat]
    n = rng.randint(*spec["points"])
    yaw = rng.uniform(0.0, 2.0 * math.pi)
    cos_y, sin_y = math.cos(yaw), math.sin(yaw)
    pts = []
    for (lx, ly, lz) in spec["builder"](rng, n):
        pts.append((x + cos_y * lx - sin_y * ly,
                    y + sin_y * lx + cos_y * ly,
                    lz))
    return _PoolObject(instance_id, cat, _sample_color(rng, cat),
                       tuple(pts), (x, y))


# -- trajectory ---------------------------------------------------------------


def _plan_scene_poses(cfg: WorldConfig, rng):
    """(x, y, yaw) per scene along serpentine rows; raises when out of room."""
    lo = ROW_MARGIN
    hi = cfg.area_extent - ROW_MARGIN
    if hi - lo < 4.0 * SCENE_STEP[1]:
        raise GenerationError(
            f"area_extent {cfg.area_extent} leaves no room for a trajectory"
        )
    poses = []
    row = 0
    while len(poses) < cfg.num_scenes:
        y_row = lo + row * ROW_SPACING
        if y_row > hi:
            raise GenerationError(
                f"cannot place {cfg.num_scenes} scenes inside extent "
                f"{cfg.area_extent} (ran out of rows at {len(poses)})"
            )
        leftward = row % 2 == 1
        yaw = math.pi if leftward else 0.0
        x = hi if leftward else lo
        while (lo <= x <= hi) and len(poses) < cfg.num_scenes:
            y = y_row + rng.uniform(-LATERAL_JITTER, LATERAL_JITTER)
            poses.append((x, y, yaw))
            step = rng.uniform(*SCENE_STEP)
            step = max(step, cfg.min_separation + 2.0 * LATERAL_JITTER)
            x += -step if leftward else step
        row += 1
    return poses


def _build_pool(cfg: WorldConfig, rng, num_rows):
    objects = []
    lo = ROW_MARGIN
    hi = cfg.area_extent - ROW_MARGIN
    for row in range(num_rows):
        y_row = lo + row * ROW_SPACING
        x = lo
        while x <= hi:
            for side in (-1.0, 1.0):
                spawns = (rng.random() < 0.9) + (rng.random() < 0.4)
                for _ in range(spawns):
                    ox = x + rng.uniform(-POOL_STEP / 2, POOL_STEP / 2)
                    oy = y_row + side * rng.uniform(*POOL_LATERAL)
                    objects.append(_spawn_object(rng, len(objects), ox, oy))
            x += POOL_STEP
    return objects


def _split_counts(n, fractions):
    """Largest-remainder rounding of n * fractions to integer counts."""
    raw = [f * n for f in fractions]
    counts = [math.floor(v) for v in raw]
    short = n - sum(counts)
    order = sorted(range(3), key=lambda i: (raw[i] - counts[i]), reverse=True)
    for i in range(short):
        counts[order[i % 3]] += 1
    return counts


# -- scene assembly -------------------------------------------------------------


def _instance_record(obj: _PoolObject, scene_xy, mean_uv, seen_points,
                     stub_dim):
    """Record the viewpoint-dependent segment of one pool object.

    Only the camera-visible points are kept (the analog of an image-aligned
    point crop), so the same object yields similar but not identical point
    sets in neighboring scenes.
    """
    sx, sy = scene_xy
    local_pts = tuple((x - sx, y - sy, z) for (x, y, z) in seen_points)
    hint = make_hint(obj.category, obj.color_rgb, mean_uv)
    image_tokens = [color_name(obj.color_rgb)] + CATEGORY_PHRASES[
        obj.category
    ].split()
    return InstanceRecord(
        instance3d=Instance3D(obj.instance_id, obj.category, local_pts,
                              obj.color_rgb),
        mean_uv=mean_uv,
        pixel_count=len(seen_points),
        hint=hint,
        stub_text_vec=tuple(stub_embed(hint.split(), "text", stub_dim)),
        stub_image_vec=tuple(stub_embed(image_tokens, "image", stub_dim)),
    )


def generate_world(cfg: WorldConfig):
    """Generate all scene triplets for one world; deterministic per seed."""
    rng = random.Random(f"world|{cfg.seed}")
    poses = _plan_scene_poses(cfg, rng)
    num_rows = 1 + max(
        int(round((y - ROW_MARGIN) / ROW_SPACING)) for (_, y, _) in poses
    )
    pool = _build_pool(cfg, rng, num_rows)

    min_inst, max_inst = cfg.instances_per_scene
    counts = _split_counts(cfg.num_scenes, cfg.split_fractions)
    bounds = (counts[0], counts[0] + counts[1])

    scenes = []
    for scene_id, (sx, sy, yaw) in enumerate(poses):
        cam = make_camera((sx, sy, CAM_HEIGHT_M), yaw, CAM_FX, CAM_FY,
                          CAM_CX, CAM_CY, CAM_WIDTH, CAM_HEIGHT)
        radius2 = cfg.submap_radius * cfg.submap_radius
        visible = []
        for obj in pool:
            dx, dy = obj.position[0] - sx, obj.position[1] - sy
            if dx * dx + dy * dy > radius2:
                continue
            seen, mean_uv = visible_subset(obj.world_points, cam)
            if len(seen) >= cfg.min_visible_points:
                visible.append((obj, mean_uv, seen))

        attempts = 0
        while len(visible) < min_inst:
            attempts += 1
            if attempts > 400:
                raise GenerationError(
                    f"scene {scene_id}: cannot reach {min_inst} visible "
                    f"instances"
                )
            bearing = yaw + rng.uniform(-TOPUP_BEARING, TOPUP_BEARING)
            dist = rng.uniform(*TOPUP_RANGE)
            obj = _spawn_object(rng, len(pool),
                                sx + dist * math.cos(bearing),
                                sy + dist * math.sin(bearing))
            seen, mean_uv = visible_subset(obj.world_points, cam)
            if len(seen) >= cfg.min_visible_points:
                pool.append(obj)
                visible.append((obj, mean_uv, seen))

        if len(visible) > max_inst:
            visible = rng.sample(visible, max_inst)

        records = tuple(
            _instance_record(obj, (sx, sy), mean_uv, seen, cfg.stub_dim)
            for (obj, mean_uv, seen) in visible
        )
        if scene_id < bounds[0]:
            split = "train"
        elif scene_id < bounds[1]:
            split = "val"
        else:
            split = "test"
        scenes.append(
            SceneTriplet(scene_id, (sx, sy), cam, records, split)
        )
    return scenes


def split_scenes(scenes, split: str):
    if split not in SPLITS:
        raise ConfigError(f"unknown split {split!r}")
    return [s for s in scenes if s.split == split]
