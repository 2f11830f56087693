"""Sliding-window chip planning and extraction over masked tiles.

A chip is a ``chip_size`` square detection window plus a ``pad`` pixel ring
of context on every side. Detections are always expressed in the window
(interior) frame, so the ring only ever provides context.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geo import InputError
from .preprocess import NODATA, MaskedTile

CHIP_SIZE = 256
STRIDE = 128
PAD = 56


@dataclass(frozen=True, order=True)
class ChipPlan:
    tile_id: str
    window_row: int
    window_col: int
    chip_size: int = CHIP_SIZE
    stride: int = STRIDE
    pad: int = PAD

    def __post_init__(self):
        if self.window_col < 0 or self.window_row < 0:
            raise InputError(f"negative window offset in {self!r}")
        if min(self.chip_size, self.stride) <= 0 or self.pad < 0:
            raise InputError(f"chip_size and stride must be positive, pad non-negative: {self!r}")

    @property
    def full_size(self) -> int:
        return self.chip_size + 2 * self.pad

    @property
    def name(self) -> str:
        return f"{self.tile_id}_{self.window_col}_{self.window_row}"


@dataclass(frozen=True, eq=False)
class Chip:
    plan: ChipPlan
    pixels: np.ndarray  # (full, full, 3) uint8
    mask: np.ndarray    # (full, full) bool; False on nodata and out-of-tile fill

    @property
    def interior(self) -> np.ndarray:
        p = self.plan.pad
        return self.pixels[p:p + self.plan.chip_size, p:p + self.plan.chip_size]

    @property
    def interior_mask(self) -> np.ndarray:
        p = self.plan.pad
        return self.mask[p:p + self.plan.chip_size, p:p + self.plan.chip_size]


def window_origins(extent: int, chip_size: int = CHIP_SIZE, stride: int = STRIDE) -> list[int]:
    """Strided origins along one axis, plus a clamped tail window when needed."""
    if extent <= 0 or chip_size <= 0 or stride <= 0:
        raise InputError(f"extent, chip_size and stride must be positive ({extent}, {chip_size}, {stride})")
    if extent <= chip_size:
        return [0]
    last = extent - chip_size
    origins = list(range(0, last + 1, stride))
    if origins[-1] != last:
        origins.append(last)
    return origins


def plan_chips(width: int, height: int, chip_size: int = CHIP_SIZE, stride: int = STRIDE,
               pad: int = PAD, tile_id: str = "") -> list[ChipPlan]:
    """Row-major chip plan covering a ``width`` x ``height`` tile."""
    cols = window_origins(width, chip_size, stride)
    rows = window_origins(height, chip_size, stride)
    return [ChipPlan(tile_id, r, c, chip_size, stride, pad) for r in rows for c in cols]


def extract_chip(tile: MaskedTile, plan: ChipPlan) -> Chip:
    """Copy the padded window; anything beyond the tile edge becomes nodata."""
    if plan.tile_id and plan.tile_id != tile.tile_id:
        raise InputError(f"plan for {plan.tile_id!r} applied to tile {tile.tile_id!r}")
    if plan.window_col >= tile.width or plan.window_row >= tile.height:
        raise InputError(f"window ({plan.window_col}, {plan.window_row}) lies outside tile {tile.tile_id!r}")
    n = plan.full_size
    pixels = np.empty((n, n, 3), dtype=np.uint8)
    pixels[:] = NODATA
    mask = np.zeros((n, n), dtype=bool)

    r0 = plan.window_row - plan.pad
    c0 = plan.window_col - plan.pad
    sr0, sc0 = max(r0, 0), max(c0, 0)
    sr1, sc1 = min(r0 + n, tile.height), min(c0 + n, tile.width)
    if sr1 > sr0 and sc1 > sc0:
        dst = (slice(sr0 - r0, sr1 - r0), slice(sc0 - c0, sc1 - c0))
        pixels[dst] = tile.pixels[sr0:sr1, sc0:sc1]
        mask[dst] = tile.mask[sr0:sr1, sc0:sc1]
    return Chip(plan, pixels, mask)
