"""Instance hint sentences: color naming, image-region labels, templates."""

from __future__ import annotations

from ..errors import ContractError

COLOR_ANCHORS = (
    ("black", (0.0, 0.0, 0.0)),
    ("white", (1.0, 1.0, 1.0)),
    ("red", (1.0, 0.0, 0.0)),
    ("green", (0.0, 1.0, 0.0)),
    ("blue", (0.0, 0.0, 1.0)),
    ("yellow", (1.0, 1.0, 0.0)),
    ("gray", (0.5, 0.5, 0.5)),
    ("brown", (0.6, 0.4, 0.2)),
)

CATEGORY_PHRASES = {
    "building": "building",
    "pole": "pole",
    "trafficLight": "traffic light",
    "fence": "fence",
    "garage": "garage",
    "tree": "tree",
    "lamp": "lamp",
    "trashBin": "trash bin",
}

_POSITION_SEP = " is at the "


def color_name(rgb) -> str:
    """Nearest named anchor by Euclidean RGB distance (ties: declared order)."""
    r, g, b = rgb
    best, best_d = None, None
    for name, (ar, ag, ab) in COLOR_ANCHORS:
        d = (r - ar) ** 2 + (g - ag) ** 2 + (b - ab) ** 2
        if best_d is None or d < best_d:
            best, best_d = name, d
    return best


def region_label(u: float, v: float) -> str:
    """One of six image regions for a normalized mean-UV position.

    U-bands: left [0, 0.4), center [0.4, 0.6), right [0.6, 1]; the V axis
    splits at 0.5 into top and bottom.
    """
    if not (0.0 <= u <= 1.0 and 0.0 <= v <= 1.0):
        raise ContractError(f"mean UV ({u}, {v}) outside the unit square")
    vertical = "top" if v < 0.5 else "bottom"
    if u < 0.4:
        horizontal = "left"
    elif u < 0.6:
        horizontal = "center"
    else:
        horizontal = "right"
    return f"{vertical} {horizontal}"


def make_hint(category: str, color_rgb, mean_uv) -> str:
    """'the <color> <category> is at the <region>' for one instance."""
    try:
        phrase = CATEGORY_PHRASES[category]
    except KeyError:
        raise ContractError(f"unknown category {category!r}") from None
    region = region_label(mean_uv[0], mean_uv[1])
    return f"the {color_name(color_rgb)} {phrase}{_POSITION_SEP}{region}"


def strip_position(hint: str) -> str:
    """Drop the position phrase (used by the no-UV ablation)."""
    idx = hint.find(_POSITION_SEP)
    return hint if idx < 0 else hint[:idx]
