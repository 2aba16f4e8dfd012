"""Pinhole camera model and point projection."""

from __future__ import annotations

import math
from dataclasses import dataclass

from ..errors import ContractError


@dataclass(frozen=True)
class CameraModel:
    """World-to-camera rigid transform plus pinhole intrinsics.

    ``pose`` is a 4x4 row-major matrix mapping world points into the camera
    frame (x right, y down, z forward). Image coordinates are pixels.
    """

    pose: tuple  # 4 rows of 4 floats
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ContractError("focal lengths must be positive")
        if len(self.pose) != 4 or any(len(r) != 4 for r in self.pose):
            raise ContractError("pose must be 4x4")
        r = [row[:3] for row in self.pose[:3]]
        det = (
            r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1])
            - r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0])
            + r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0])
        )
        if abs(det - 1.0) > 1e-9:
            raise ContractError(f"rotation determinant {det} != +1")
        for i in range(3):
            for j in range(3):
                dot = sum(r[i][k] * r[j][k] for k in range(3))
                want = 1.0 if i == j else 0.0
                if abs(dot - want) > 1e-9:
                    raise ContractError("rotation rows are not orthonormal")


def make_camera(position, yaw: float, fx: float, fy: float, cx: float,
                cy: float, width: int, height: int) -> CameraModel:
    """Camera at ``position`` looking horizontally along world yaw (z up)."""
    px, py, pz = position
    f = (math.cos(yaw), math.sin(yaw), 0.0)  # forward (camera z)
    r = (math.sin(yaw), -math.cos(yaw), 0.0)  # right (camera x)
    d = (0.0, 0.0, -1.0)  # down (camera y)
    rows = []
    for axis in (r, d, f):
        t = -(axis[0] * px + axis[1] * py + axis[2] * pz)
        rows.append((axis[0], axis[1], axis[2], t))
    rows.append((0.0, 0.0, 0.0, 1.0))
    return CameraModel(tuple(rows), fx, fy, cx, cy, width, height)


def project_point(p, cam: CameraModel):
    """Project a world point to pixel (u, v), or None if behind the camera."""
    x, y, z = p
    rows = cam.pose
    zc = rows[2][0] * x + rows[2][1] * y + rows[2][2] * z + rows[2][3]
    if zc <= 0.0:
        return None
    xc = rows[0][0] * x + rows[0][1] * y + rows[0][2] * z + rows[0][3]
    yc = rows[1][0] * x + rows[1][1] * y + rows[1][2] * z + rows[1][3]
    return (cam.fx * xc / zc + cam.cx, cam.fy * yc / zc + cam.cy)


def visible_subset(points, cam: CameraModel):
    """In-frame points plus their mean normalized UV.

    Points behind the camera or outside the image bounds are dropped; the
    remainder is the viewpoint-dependent segment of the instance (what a
    per-image crop of the object would contain). Returns ``([], None)`` when
    nothing is visible.
    """
    rows = cam.pose
    r0, r1, r2 = rows[0], rows[1], rows[2]
    w, h = float(cam.width), float(cam.height)
    su = sv = 0.0
    kept = []
    for p in points:
        x, y, z = p
        zc = r2[0] * x + r2[1] * y + r2[2] * z + r2[3]
        if zc <= 0.0:
            continue
        u = cam.fx * (r0[0] * x + r0[1] * y + r0[2] * z + r0[3]) / zc + cam.cx
        if u < 0.0 or u >= w:
            continue
        v = cam.fy * (r1[0] * x + r1[1] * y + r1[2] * z + r1[3]) / zc + cam.cy
        if v < 0.0 or v >= h:
            continue
        su += u
        sv += v
        kept.append(p)
    if not kept:
        return [], None
    n = len(kept)
    return kept, (su / n / w, sv / n / h)


def instance_uv_stats(points, cam: CameraModel):
    """Mean normalized UV over the in-frame points plus their count.

    Returns ``(None, 0)`` when nothing is visible.
    """
    kept, mean_uv = visible_subset(points, cam)
    return mean_uv, len(kept)
