"""Pipeline configuration: one JSON file plus command-line overrides."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from .geo import InputError


@dataclass(frozen=True)
class PipelineConfig:
    buffer_radius: float = 100.0
    chip_size: int = 256
    stride: int = 128
    pad: int = 56
    confidence_floor: float = 0.05
    overlap_floor: float = 0.10
    overlap_method: str = "iou"
    sweep_floors: tuple[float, ...] = (0.75, 0.50, 0.25, 0.10, 0.05)
    schema: int = 4
    score_floor: float = 0.8
    template_size: int = 32
    templates: str | None = None
    tiles: str | None = None
    centerlines: str | None = None
    gt: str | None = None
    out: str = "out"
    threads: int = 1
    dump_chips: bool = False
    model_name: str = "reference"

    def __post_init__(self):
        object.__setattr__(self, "sweep_floors", tuple(float(f) for f in self.sweep_floors))
        for name in ("buffer_radius", "chip_size", "stride", "confidence_floor", "overlap_floor",
                     "template_size", "threads"):
            if not getattr(self, name) > 0:
                raise InputError(f"{name} must be positive, got {getattr(self, name)!r}")
        if self.pad < 0:
            raise InputError(f"pad must be non-negative, got {self.pad}")
        if self.overlap_floor > 1 or self.confidence_floor > 1:
            raise InputError("overlap_floor and confidence_floor must not exceed 1")
        if not 0 <= self.score_floor < 1:
            raise InputError(f"score_floor must be in [0, 1), got {self.score_floor}")
        if self.schema not in (4, 12):
            raise InputError(f"schema must be 4 or 12, got {self.schema}")
        if self.overlap_method not in ("iou", "min", "max"):
            raise InputError(f"overlap_method must be iou, min or max, got {self.overlap_method!r}")
        fl = list(self.sweep_floors)
        if not fl or any(f <= 0 for f in fl) or fl != sorted(fl, reverse=True):
            raise InputError(f"sweep_floors must be positive and descending, got {fl}")

    @classmethod
    def load(cls, path: str | Path | None = None, **overrides) -> "PipelineConfig":
        """Defaults, then the JSON file at ``path``, then non-None ``overrides``."""
        data = {}
        if path:
            try:
                data = json.loads(Path(path).read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise InputError(f"cannot read config {path}: {exc}") from None
            known = {f.name for f in fields(cls)}
            unknown = set(data) - known
            if unknown:
                raise InputError(f"unknown config keys: {sorted(unknown)}")
        data.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**data)

    def with_(self, **changes) -> "PipelineConfig":
        return replace(self, **changes)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2) + "\n"
