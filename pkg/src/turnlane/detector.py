"""Per-chip detector interface and the template-correlation reference detector.

Any object with a ``detect(chip) -> list[ChipDetection]`` method can drive
the pipeline. ``ReferenceDetector`` is a deterministic zero-normalized
cross-correlation matcher; ``CallableDetector`` is the slot for an
externally trained model.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Protocol, Sequence

import numpy as np
from PIL import Image
from scipy.ndimage import maximum_filter
from scipy.signal import fftconvolve

from .chipper import Chip
from .geo import InputError
from .labels import TURNING_LABELS, LaneLabel
from . import stencils

CONFIDENCE_FLOOR = 0.05
DEFAULT_SCORE_FLOOR = 0.8
DEFAULT_TEMPLATE_SIZE = 32
MARKING_VALUE = 230.0
PAVEMENT_VALUE = 90.0


class UndefinedScoreError(ValueError):
    """NCC is undefined for a patch with zero variance."""


@dataclass(frozen=True)
class ChipDetection:
    label: LaneLabel
    bbox: tuple[float, float, float, float]  # x1, y1, x2, y2 in window pixels
    confidence: float


@dataclass(frozen=True, eq=False)
class ArrowTemplate:
    label: LaneLabel
    pixels: np.ndarray  # bool stencil, True = paint

    @property
    def size(self) -> int:
        return self.pixels.shape[0]


class Detector(Protocol):
    def detect(self, chip: Chip) -> list[ChipDetection]: ...


def detect_chip(chip: Chip, model: Detector) -> list[ChipDetection]:
    """Validate ``chip`` and run ``model`` on it."""
    n = chip.plan.full_size
    if chip.pixels.shape != (n, n, 3) or chip.pixels.dtype != np.uint8:
        raise InputError(f"chip {chip.plan.name} has shape {chip.pixels.shape}, expected ({n}, {n}, 3) uint8")
    if chip.mask.shape != (n, n):
        raise InputError(f"chip {chip.plan.name} mask shape {chip.mask.shape} does not match")
    return model.detect(chip)


def to_gray(rgb: np.ndarray) -> np.ndarray:
    rgb = np.asarray(rgb, dtype=np.float64)
    return rgb[..., 0] * 0.299 + rgb[..., 1] * 0.587 + rgb[..., 2] * 0.114


def _zero_mean(a: np.ndarray) -> tuple[np.ndarray, float]:
    z = a - a.mean()
    ss = float((z * z).sum())
    scale = max(1.0, float(np.abs(a).max()) ** 2)
    if ss <= 1e-12 * a.size * scale:
        raise UndefinedScoreError("patch has zero variance")
    return z, ss


def ncc_score(image: np.ndarray, template: np.ndarray) -> float:
    """Zero-normalized cross-correlation of two equal-size grayscale patches."""
    image = np.asarray(image, dtype=np.float64)
    template = np.asarray(template, dtype=np.float64)
    if image.shape != template.shape:
        raise InputError(f"patch shapes differ: {image.shape} vs {template.shape}")
    zi, si = _zero_mean(image)
    zt, st = _zero_mean(template)
    return float(np.clip((zi * zt).sum() / np.sqrt(si * st), -1.0, 1.0))


def ncc_map(image: np.ndarray, template: np.ndarray) -> np.ndarray:
    """NCC of ``template`` at every valid offset of ``image``.

    Output[r, c] scores the window whose top-left is (r, c). Windows with no
    variance score 0.
    """
    image = np.asarray(image, dtype=np.float64)
    zt, st = _zero_mean(np.asarray(template, dtype=np.float64))
    h, w = zt.shape
    n = h * w
    num = fftconvolve(image, zt[::-1, ::-1], mode="valid")
    ii = np.pad(image, ((1, 0), (1, 0))).cumsum(0).cumsum(1)
    ii2 = np.pad(image * image, ((1, 0), (1, 0))).cumsum(0).cumsum(1)

    def window_sum(c):
        return c[h:, w:] - c[:-h, w:] - c[h:, :-w] + c[:-h, :-w]

    s1 = window_sum(ii)
    var = window_sum(ii2) - s1 * s1 / n
    ok = var > 1e-6 * n
    out = np.zeros_like(num)
    out[ok] = num[ok] / np.sqrt(var[ok] * st)
    return np.clip(out, -1.0, 1.0)


def score_to_confidence(score: float, score_floor: float) -> float:
    conf = (score - score_floor) / (1.0 - score_floor)
    return float(min(1.0, max(CONFIDENCE_FLOOR, conf)))


@dataclass(frozen=True, eq=False)
class ReferenceDetector:
    """Slides every template, at four right-angle rotations, over the chip window.

    Local maxima scoring at least ``score_floor`` become detections. Maxima
    of one class closer than half a template apart are thinned greedily,
    strongest first.
    """

    templates: tuple[ArrowTemplate, ...]
    score_floor: float = DEFAULT_SCORE_FLOOR
    _bank: tuple = field(init=False, repr=False)

    def __post_init__(self):
        if not self.templates:
            raise InputError("reference detector needs at least one template")
        if not 0 <= self.score_floor < 1:
            raise InputError(f"score_floor must be in [0, 1), got {self.score_floor}")
        bank = []
        for tpl in self.templates:
            seen = []
            for k in range(4):
                rot = np.rot90(tpl.pixels, -k)
                if any(np.array_equal(rot, s) for s in seen):
                    continue
                seen.append(rot)
                bank.append((tpl.label, rot.astype(np.float64)))
        object.__setattr__(self, "templates", tuple(self.templates))
        object.__setattr__(self, "_bank", tuple(bank))

    def detect(self, chip: Chip) -> list[ChipDetection]:
        if not chip.interior_mask.any():
            return []
        gray = to_gray(chip.interior)
        cands = []
        for label, tpl in self._bank:
            if tpl.shape[0] > gray.shape[0] or tpl.shape[1] > gray.shape[1]:
                continue
            scores = ncc_map(gray, tpl)
            peaks = (scores >= self.score_floor) & (scores == maximum_filter(scores, size=3, mode="constant", cval=-1.0))
            for r, c in zip(*np.nonzero(peaks)):
                cands.append((float(scores[r, c]), int(label), int(r), int(c), tpl.shape[0], tpl.shape[1]))
        cands.sort(key=lambda x: (-x[0], x[1], x[2], x[3]))

        kept: list[tuple] = []
        for s, lab, r, c, h, w in cands:
            cy, cx = r + h / 2, c + w / 2
            if any(k[1] == lab and np.hypot(cy - (k[2] + k[4] / 2), cx - (k[3] + k[5] / 2)) < min(h, w) / 2
                   for k in kept):
                continue
            kept.append((s, lab, r, c, h, w))
        return [ChipDetection(LaneLabel(lab), (float(c), float(r), float(c + w), float(r + h)),
                              score_to_confidence(s, self.score_floor))
                for s, lab, r, c, h, w in kept]


@dataclass(frozen=True, eq=False)
class CallableDetector:
    """Adapter for an external engine.

    ``fn`` receives the full padded chip pixels and returns
    ``(label, (x1, y1, x2, y2), confidence)`` triples in window coordinates.
    Boxes are clipped to the window and results under the floor dropped.
    """

    fn: Callable[[np.ndarray], Iterable[tuple]]
    confidence_floor: float = CONFIDENCE_FLOOR

    def detect(self, chip: Chip) -> list[ChipDetection]:
        size = chip.plan.chip_size
        out = []
        for label, bbox, conf in self.fn(chip.pixels):
            if conf < self.confidence_floor:
                continue
            x1, y1, x2, y2 = (min(max(float(v), 0.0), float(size)) for v in bbox)
            if x2 <= x1 or y2 <= y1:
                continue
            out.append(ChipDetection(LaneLabel.parse(label), (x1, y1, x2, y2), min(1.0, float(conf))))
        return out


# -- templates on disk -------------------------------------------------------

def default_templates(labels: Sequence[LaneLabel] = TURNING_LABELS,
                      size: int = DEFAULT_TEMPLATE_SIZE) -> tuple[ArrowTemplate, ...]:
    return tuple(ArrowTemplate(lab, stencils.stencil(lab, size)) for lab in labels)


def save_templates(directory: Path, templates: Sequence[ArrowTemplate]) -> None:
    """One ``<label>.png`` stencil plus ``<label>.json`` sidecar per template."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for tpl in templates:
        Image.fromarray(np.where(tpl.pixels, 255, 0).astype(np.uint8), mode="L").save(directory / f"{tpl.label.slug}.png")
        sidecar = {"label": tpl.label.slug, "nominal_size": tpl.size}
        (directory / f"{tpl.label.slug}.json").write_text(json.dumps(sidecar, indent=2) + "\n")


def load_templates(directory: Path) -> tuple[ArrowTemplate, ...]:
    directory = Path(directory)
    out = []
    for meta_path in sorted(directory.glob("*.json")):
        meta = json.loads(meta_path.read_text())
        with Image.open(meta_path.with_suffix(".png")) as im:
            px = np.asarray(im.convert("L")) >= 128
        size = int(meta.get("nominal_size", px.shape[0]))
        if px.shape != (size, size):
            with Image.open(meta_path.with_suffix(".png")) as im:
                px = np.asarray(im.convert("L").resize((size, size), Image.NEAREST)) >= 128
        out.append(ArrowTemplate(LaneLabel.parse(meta["label"]), px))
    if not out:
        raise InputError(f"no templates found in {directory}")
    return tuple(sorted(out, key=lambda t: t.label))


# -- model card --------------------------------------------------------------

@dataclass(frozen=True)
class ModelCard:
    """Training settings of the original neural detectors. Recorded, never executed."""

    architecture: str = "YOLOv3"
    learning_rate_12_class: float = 1.096e-06
    learning_rate_4_class: float = 3.311e-06
    batch_size: int = 64
    anchor_boxes: int = 9
    train_fraction: float = 0.70
    validation_fraction: float = 0.15
    test_fraction: float = 0.15
    chip_size: int = 256
    stride: int = 128
    pad: int = 56
    resolution_ft_per_px: float = 0.5
    detection_threshold: float = 0.05
    rotation_augmentation_deg: int = 90
    labeled_features_12_class: int = 23669
    labeled_features_4_class: int = 8241
    exported_chips: int = 468176
    exported_chip_features: int = 567876

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2) + "\n"
