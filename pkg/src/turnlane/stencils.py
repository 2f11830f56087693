"""Binary arrow stencils for the reference detector and synthetic scenes.

Stencils are drawn pointing "up" (direction of travel towards row 0) and
are square, so 90 degree rotations keep their footprint.
"""
from __future__ import annotations

import numpy as np
from PIL import Image, ImageDraw

from .labels import LaneLabel

SUPERSAMPLE = 4

# unit-square polygons of a left-turn arrow: shaft, elbow bar, head
_LEFT_ARROW = (
    [(0.56, 0.40), (0.72, 0.40), (0.72, 0.96), (0.56, 0.96)],
    [(0.30, 0.28), (0.72, 0.28), (0.72, 0.46), (0.30, 0.46)],
    [(0.04, 0.37), (0.34, 0.10), (0.34, 0.64)],
)


def _render(polys, size: int) -> np.ndarray:
    big = size * SUPERSAMPLE
    im = Image.new("L", (big, big), 0)
    draw = ImageDraw.Draw(im)
    for poly in polys:
        draw.polygon([(x * big, y * big) for x, y in poly], fill=255)
    arr = np.asarray(im, dtype=np.float64) / 255.0
    arr = arr.reshape(size, SUPERSAMPLE, size, SUPERSAMPLE).mean(axis=(1, 3))
    return arr >= 0.5


def left_arrow(size: int) -> np.ndarray:
    return _render(_LEFT_ARROW, size)


def right_arrow(size: int) -> np.ndarray:
    return np.fliplr(left_arrow(size)).copy()


def center_arrows(size: int) -> np.ndarray:
    """Two half-scale left arrows facing each other, one per travel direction."""
    half = [[(0.02 + 0.5 * x, 0.04 + 0.5 * y) for x, y in poly] for poly in _LEFT_ARROW]
    a = _render(half, size)
    return a | np.rot90(a, 2)


def stencil(label: LaneLabel, size: int) -> np.ndarray:
    label = LaneLabel.parse(label)
    if label is LaneLabel.LEFT_ONLY:
        return left_arrow(size)
    if label is LaneLabel.RIGHT_ONLY:
        return right_arrow(size)
    if label is LaneLabel.CENTER:
        return center_arrows(size)
    raise ValueError(f"no stencil drawn for {label.slug}")
