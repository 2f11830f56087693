"""Turning-lane class schema.

The 12-class schema numbers classes 1..12; the 4-class schema keeps four of
them with the same ids so detections can move between schemas without
renumbering.
"""
from __future__ import annotations

import enum


class LaneLabel(enum.IntEnum):
    LEFT_ONLY = 1
    RIGHT_ONLY = 2
    LEFT_RIGHT = 3
    THROUGH = 4
    LEFT_THROUGH = 5
    RIGHT_THROUGH = 6
    LEFT_RIGHT_THROUGH = 7
    CENTER = 8
    BICYCLE = 9
    MERGE = 10
    U_TURN = 11
    NONE = 12

    @property
    def slug(self) -> str:
        return self.name.lower()

    @classmethod
    def parse(cls, value) -> "LaneLabel":
        """Accept an id (int or numeric string) or a slug such as ``"left_only"``."""
        if isinstance(value, LaneLabel):
            return value
        if isinstance(value, int) or (isinstance(value, str) and value.strip().isdigit()):
            return cls(int(value))
        try:
            return cls[str(value).strip().upper()]
        except KeyError:
            raise ValueError(f"unknown lane label {value!r}") from None

    def __str__(self) -> str:
        return self.slug


class Schema(enum.Enum):
    SCHEMA12 = 12
    SCHEMA4 = 4

    @property
    def labels(self) -> tuple[LaneLabel, ...]:
        if self is Schema.SCHEMA12:
            return tuple(LaneLabel)
        return (LaneLabel.LEFT_ONLY, LaneLabel.RIGHT_ONLY, LaneLabel.CENTER, LaneLabel.NONE)

    @classmethod
    def parse(cls, value) -> "Schema":
        if isinstance(value, Schema):
            return value
        return cls(int(value))


# classes that the inventory and evaluation report on
TURNING_LABELS = (LaneLabel.LEFT_ONLY, LaneLabel.RIGHT_ONLY, LaneLabel.CENTER)


def project(label: LaneLabel, schema: Schema) -> LaneLabel:
    """Map a label into ``schema``; labels outside it become ``NONE``."""
    return label if label in schema.labels else LaneLabel.NONE
