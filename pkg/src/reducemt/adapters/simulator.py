"""Deterministic synthetic scenes standing in for the captioner and detector.

A scene is a light canvas holding a few striped rectangles, one per labeled object.
Each object alternates its ``color`` with a half-intensity ``shade`` in 3-pixel stripes,
so a Gaussian blur over the object washes both tones out while cropping, stretching
and rotating keep them recognizable.  The simulated captioner counts the pixels of
each object's tones in the presented image and mentions the object when enough of it
is still visible.
"""

from __future__ import annotations

import json
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from ..errors import InputDomainError
from ..imagery import BBox, Raster
from .roles import Detection

STRIPE_WIDTH = 3
COLOR_TOLERANCE = 20
DEFAULT_BACKGROUND = (235, 235, 225)
DEFAULT_VISIBILITY = 0.5

# Pairwise Chebyshev separation of every color and shade exceeds twice the tolerance.
PALETTE: dict[str, tuple[int, int, int]] = {
    "ball": (72, 252, 216),
    "box": (168, 96, 72),
    "cat": (204, 120, 204),
    "dog": (60, 156, 192),
    "car": (24, 228, 24),
    "chair": (12, 0, 168),
    "cup": (180, 24, 180),
    "book": (132, 216, 72),
    "vase": (240, 240, 12),
    "flower": (228, 240, 120),
    "laptop": (228, 0, 24),
    "bottle": (180, 240, 252),
    "clock": (24, 252, 120),
}
VOCABULARY: tuple[str, ...] = tuple(PALETTE)


def shade_of(color: Sequence[int]) -> tuple[int, int, int]:
    return tuple(int(c) // 2 for c in color)  # type: ignore[return-value]


def article(word: str) -> str:
    return "an" if word[:1].lower() in "aeiou" else "a"


@dataclass(frozen=True)
class SceneObject:
    label: str
    box: BBox
    color: tuple[int, int, int]

    def __post_init__(self) -> None:
        if not self.label or self.label != self.label.lower():
            raise InputDomainError(f"scene label {self.label!r} must be lowercase and nonempty")
        if len(self.color) != 3 or not all(0 <= int(c) <= 255 for c in self.color):
            raise InputDomainError(f"bad color {self.color!r} for {self.label!r}")
        object.__setattr__(self, "color", tuple(int(c) for c in self.color))

    @property
    def shade(self) -> tuple[int, int, int]:
        return shade_of(self.color)

    def to_json(self) -> dict[str, Any]:
        return {"label": self.label, "box": self.box.as_list(), "color": list(self.color)}

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> "SceneObject":
        label = str(data["label"]).lower()
        color = data.get("color") or PALETTE.get(label)
        if color is None:
            raise InputDomainError(f"object {label!r} has no color and no palette entry")
        return cls(label, BBox.from_list(data["box"]), tuple(color))


@dataclass(frozen=True)
class SyntheticScene:
    width: int
    height: int
    objects: tuple[SceneObject, ...]
    background: tuple[int, int, int] = DEFAULT_BACKGROUND

    def __post_init__(self) -> None:
        object.__setattr__(self, "objects", tuple(self.objects))
        if self.width < 1 or self.height < 1:
            raise InputDomainError(f"canvas {self.width}x{self.height} is empty")
        for obj in self.objects:
            if not obj.box.within(self.width, self.height):
                raise InputDomainError(f"object {obj.label!r} box {obj.box.as_list()} outside canvas")

    def render(self) -> Raster:
        px = np.empty((self.height, self.width, 3), dtype=np.uint8)
        px[:] = self.background
        for obj in self.objects:
            b = obj.box
            vertical = b.width >= b.height
            n = b.width if vertical else b.height
            band = (np.arange(n) // STRIPE_WIDTH) % 2 == 1
            tones = np.where(band[:, None], np.array(obj.shade), np.array(obj.color)).astype(np.uint8)
            region = px[b.slices()]
            region[:] = tones[None, :, :] if vertical else tones[:, None, :]
        return Raster(px)

    def labels(self) -> list[str]:
        return [o.label for o in self.objects]

    def to_json(self) -> dict[str, Any]:
        return {
            "canvas": [self.width, self.height],
            "objects": [o.to_json() for o in self.objects],
            "background": list(self.background),
        }

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> "SyntheticScene":
        try:
            w, h = data["canvas"]
            objects = tuple(SceneObject.from_json(o) for o in data["objects"])
        except (KeyError, TypeError, ValueError) as exc:
            raise InputDomainError(f"malformed scene: {exc}") from exc
        bg = tuple(data.get("background") or DEFAULT_BACKGROUND)
        return cls(int(w), int(h), objects, bg)  # type: ignore[arg-type]

    @classmethod
    def load(cls, path: str | Path) -> "SyntheticScene":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass(frozen=True)
class FaultSpec:
    """A captioning fault.  ``mode`` is one of none, omit, misclassify, fabricate.

    ``followup_only`` limits the fault to images that are not the source frame or an
    in-place occlusion of it, so localization sees a faithful captioner.
    """

    mode: str = "none"
    label: str | None = None
    target: str | None = None
    visibility_threshold: float = DEFAULT_VISIBILITY
    followup_only: bool = True

    def __post_init__(self) -> None:
        if self.mode not in ("none", "omit", "misclassify", "fabricate"):
            raise InputDomainError(f"unknown fault mode {self.mode!r}")
        if not 0.0 < self.visibility_threshold <= 1.0:
            raise InputDomainError(f"visibility threshold {self.visibility_threshold} outside (0, 1]")
        if self.mode != "none" and not self.label:
            raise InputDomainError(f"fault {self.mode!r} needs a label")
        if self.mode in ("misclassify", "fabricate") and not self.target:
            raise InputDomainError(f"fault {self.mode!r} needs a target label")

    @classmethod
    def none(cls, **kw) -> "FaultSpec":
        return cls("none", **kw)

    @classmethod
    def omit(cls, label: str, **kw) -> "FaultSpec":
        return cls("omit", label, **kw)

    @classmethod
    def misclassify(cls, src: str, dst: str, **kw) -> "FaultSpec":
        return cls("misclassify", src, dst, **kw)

    @classmethod
    def fabricate(cls, trigger: str, fabricated: str, **kw) -> "FaultSpec":
        return cls("fabricate", trigger, fabricated, **kw)

    def to_json(self) -> dict[str, Any]:
        return {"mode": self.mode, "label": self.label, "target": self.target,
                "visibility_threshold": self.visibility_threshold, "followup_only": self.followup_only}

    @classmethod
    def from_json(cls, data: Mapping[str, Any] | None) -> "FaultSpec":
        if not data:
            return cls()
        return cls(str(data.get("mode", "none")), data.get("label"), data.get("target"),
                   float(data.get("visibility_threshold", DEFAULT_VISIBILITY)),
                   bool(data.get("followup_only", True)))


def _tone_hits(pixels: np.ndarray, obj: SceneObject) -> np.ndarray:
    px = pixels.astype(np.int16)
    hit = np.zeros(px.shape[:2], dtype=bool)
    for tone in (obj.color, obj.shade):
        hit |= np.abs(px - np.array(tone, dtype=np.int16)).max(axis=2) <= COLOR_TOLERANCE
    return hit


def visible_fraction(image: Raster, obj: SceneObject) -> float:
    """Pixels of the object's tones anywhere in ``image`` over its original box area, capped at 1."""
    return min(1.0, int(_tone_hits(image.pixels, obj).sum()) / obj.box.area)


def in_place_fraction(image: Raster, obj: SceneObject) -> float:
    """Fraction of the object's own box still showing its tones (source-frame images only)."""
    if not obj.box.within(image.width, image.height):
        return 0.0
    return int(_tone_hits(image.pixels[obj.box.slices()], obj).sum()) / obj.box.area


def is_source_frame(scene: SyntheticScene, image: Raster, reference: Raster | None = None) -> bool:
    """True for the rendered scene itself and for edits confined to one object's box."""
    if image.shape != (scene.height, scene.width):
        return False
    ref = reference if reference is not None else scene.render()
    diff = np.any(image.pixels != ref.pixels, axis=2)
    if not diff.any():
        return True
    ys, xs = np.nonzero(diff)
    changed = BBox(int(xs.min()), int(ys.min()), int(xs.max()) + 1, int(ys.max()) + 1)
    return any(obj.box.contains(changed) for obj in scene.objects)


def caption_text(labels: Sequence[str]) -> str:
    if not labels:
        return "nothing"
    return " and ".join(f"{article(l)} {l}" for l in labels)


def visible_labels(scene: SyntheticScene, image: Raster, threshold: float = DEFAULT_VISIBILITY) -> list[str]:
    order = sorted(scene.objects, key=lambda o: (o.box.x0, o.box.y0, o.label))
    return [o.label for o in order if visible_fraction(image, o) >= threshold]


def apply_fault(labels: list[str], fault: FaultSpec) -> list[str]:
    out = list(labels)
    if fault.mode == "omit":
        out = [l for l in out if l != fault.label]
    elif fault.mode == "misclassify":
        out = [fault.target if l == fault.label else l for l in out]  # type: ignore[misc]
    elif fault.mode == "fabricate":
        if fault.label in out and fault.target not in out:
            out.append(fault.target)  # type: ignore[arg-type]
    return out


def simulate(scene: SyntheticScene, fault: FaultSpec, image: Raster, reference: Raster | None = None) -> str:
    """Caption ``image`` as a faithful or faulty captioner would for ``scene``."""
    labels = visible_labels(scene, image, fault.visibility_threshold)
    if fault.mode != "none" and not (fault.followup_only and is_source_frame(scene, image, reference)):
        labels = apply_fault(labels, fault)
    return caption_text(labels)


class SimulatedCaptioner:
    def __init__(self, scene: SyntheticScene, fault: FaultSpec | None = None):
        self.scene = scene
        self.fault = fault or FaultSpec()
        self._reference = scene.render()

    def caption(self, image: Raster) -> str:
        return simulate(self.scene, self.fault, image, self._reference)


@dataclass(frozen=True)
class DetectorSpec:
    """Knobs for the simulated detector.

    ``relabel`` maps scene labels to reported labels, ``miss`` hides objects, ``scores``
    overrides the default confidence and ``jitter`` perturbs box edges by up to that
    many pixels (seeded, reproducible).
    """

    jitter: int = 0
    seed: int = 0
    relabel: Mapping[str, str] = field(default_factory=dict)
    miss: frozenset[str] = frozenset()
    scores: Mapping[str, float] = field(default_factory=dict)
    default_score: float = 0.9

    def to_json(self) -> dict[str, Any]:
        return {"jitter": self.jitter, "seed": self.seed, "relabel": dict(sorted(self.relabel.items())),
                "miss": sorted(self.miss), "scores": dict(sorted(self.scores.items())),
                "default_score": self.default_score}

    @classmethod
    def from_json(cls, data: Mapping[str, Any] | None) -> "DetectorSpec":
        if not data:
            return cls()
        return cls(int(data.get("jitter", 0)), int(data.get("seed", 0)), dict(data.get("relabel", {})),
                   frozenset(data.get("miss", ())), dict(data.get("scores", {})),
                   float(data.get("default_score", 0.9)))


class SimulatedDetector:
    def __init__(self, scene: SyntheticScene, spec: DetectorSpec | None = None):
        self.scene = scene
        self.spec = spec or DetectorSpec()

    def _jittered(self, obj: SceneObject) -> BBox:
        j = self.spec.jitter
        if j <= 0:
            return obj.box
        rng = np.random.default_rng([self.spec.seed, zlib.crc32(obj.label.encode())])
        d = rng.integers(-j, j + 1, size=4)
        w, h = self.scene.width, self.scene.height
        x0 = int(np.clip(obj.box.x0 + d[0], 0, w - 1))
        y0 = int(np.clip(obj.box.y0 + d[1], 0, h - 1))
        x1 = int(np.clip(obj.box.x1 + d[2], x0 + 1, w))
        y1 = int(np.clip(obj.box.y1 + d[3], y0 + 1, h))
        return BBox(x0, y0, x1, y1)

    def detect(self, image: Raster) -> list[Detection]:
        if image.shape != (self.scene.height, self.scene.width):
            return []
        out = []
        for obj in self.scene.objects:
            if obj.label in self.spec.miss or in_place_fraction(image, obj) < DEFAULT_VISIBILITY:
                continue
            out.append(Detection(self.spec.relabel.get(obj.label, obj.label),
                                 float(self.spec.scores.get(obj.label, self.spec.default_score)),
                                 self._jittered(obj)))
        return out


def random_scene(rng: np.random.Generator, width: int = 96, height: int = 96, n_min: int = 2,
                 n_max: int = 4, size_min: int = 14, size_max: int = 34, margin: int = 3,
                 vocabulary: Sequence[str] = VOCABULARY, max_tries: int = 400) -> SyntheticScene:
    """Place 2-4 non-overlapping objects with distinct labels and at least ``margin`` pixels apart."""
    n = int(rng.integers(n_min, n_max + 1))
    labels = [str(l) for l in rng.choice(list(vocabulary), size=n, replace=False)]
    placed: list[SceneObject] = []
    for label in labels:
        for _ in range(max_tries):
            bw, bh = (int(v) for v in rng.integers(size_min, size_max + 1, size=2))
            x0 = int(rng.integers(1, width - bw))
            y0 = int(rng.integers(1, height - bh))
            box = BBox(x0, y0, x0 + bw, y0 + bh)
            grown = BBox(max(0, x0 - margin), max(0, y0 - margin), x0 + bw + margin, y0 + bh + margin)
            if all(grown.iou(p.box) == 0 for p in placed):
                placed.append(SceneObject(label, box, PALETTE[label]))
                break
    return SyntheticScene(width, height, tuple(placed))


def write_scene(directory: str | Path, stem: str, scene: SyntheticScene,
                fault: FaultSpec | None = None, detector: DetectorSpec | None = None) -> Path:
    """Write ``<stem>.png`` plus its ``<stem>.scene.json`` sidecar; returns the image path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    img_path = directory / f"{stem}.png"
    scene.render().save_png(img_path)
    meta = scene.to_json()
    if fault is not None and fault.mode != "none":
        meta["fault"] = fault.to_json()
    if detector is not None:
        meta["detector"] = detector.to_json()
    (directory / f"{stem}.scene.json").write_text(json.dumps(meta, sort_keys=True, indent=1) + "\n",
                                                  encoding="utf-8")
    return img_path


def sidecar_path(image_path: str | Path) -> Path:
    p = Path(image_path)
    return p.with_name(p.stem + ".scene.json")


def load_sidecar(image_path: str | Path) -> tuple[SyntheticScene, FaultSpec, DetectorSpec]:
    path = sidecar_path(image_path)
    if not path.exists():
        raise InputDomainError(f"no scene sidecar {path.name} for simulator mode")
    data = json.loads(path.read_text(encoding="utf-8"))
    return SyntheticScene.from_json(data), FaultSpec.from_json(data.get("fault")), \
        DetectorSpec.from_json(data.get("detector"))
