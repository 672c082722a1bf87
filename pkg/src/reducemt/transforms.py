"""Reduction transformations: cropping, stretching and rotation.

Every transformation returns the follow-up image together with ``m_tran``, a mask
over the *source* frame marking the pixels that are still visible afterwards.
Follow-up images are rendered lazily; candidate pools only need the masks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Any

import numpy as np
from scipy import ndimage

from .errors import GuidelineViolation, InputDomainError
from .imagery import BBox, BitMask, Raster

MAX_ROTATION_DEG = 30
MIN_STRETCH_RETAIN = 0.6
MAX_STRETCH_FACTOR = 1.0 / MIN_STRETCH_RETAIN
STRETCH_FACTOR_STEP = 1.0 / 30.0
CROP_TOP_LEFT_POINTS = 10
CROP_LATTICE = 5
DEFAULT_AREA_FRACTION = 0.10

_EPS = 1e-9


class TransformKind(str, Enum):
    CROP = "crop"
    STRETCH = "stretch"
    ROTATE = "rotate"

    @property
    def mr(self) -> str:
        return {"crop": "MR1", "stretch": "MR2", "rotate": "MR3"}[self.value]

    @classmethod
    def from_mr(cls, name: str) -> "TransformKind":
        table = {"MR1": cls.CROP, "MR2": cls.STRETCH, "MR3": cls.ROTATE}
        key = name.upper().replace("-", "")
        if key in table:
            return table[key]
        return cls(name.lower())


@dataclass(frozen=True)
class TransformSpec:
    """One parameterized reduction transform.

    Exactly the parameters of ``kind`` are populated: ``top_left``/``bottom_right``
    for crops (bottom-right exclusive), ``axis``/``factor``/``anchor`` for stretches
    and ``angle`` (degrees) for rotations.
    """

    kind: TransformKind
    top_left: tuple[int, int] | None = None
    bottom_right: tuple[int, int] | None = None
    axis: str | None = None
    factor: float | None = None
    anchor: int | None = None
    angle: float | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", TransformKind(self.kind))
        crop = (self.top_left, self.bottom_right)
        stretch = (self.axis, self.factor, self.anchor)
        rotate = (self.angle,)
        groups = {TransformKind.CROP: crop, TransformKind.STRETCH: stretch, TransformKind.ROTATE: rotate}
        for kind, values in groups.items():
            populated = [v is not None for v in values]
            if kind is self.kind and not all(populated):
                raise InputDomainError(f"{kind.value} spec is missing parameters")
            if kind is not self.kind and any(populated):
                raise InputDomainError(f"{self.kind.value} spec carries {kind.value} parameters")
        if self.axis is not None and self.axis not in ("horizontal", "vertical"):
            raise InputDomainError(f"stretch axis must be horizontal or vertical, got {self.axis!r}")

    @classmethod
    def crop(cls, top_left: tuple[int, int], bottom_right: tuple[int, int]) -> "TransformSpec":
        return cls(TransformKind.CROP, top_left=tuple(map(int, top_left)),
                   bottom_right=tuple(map(int, bottom_right)))

    @classmethod
    def stretch(cls, axis: str, factor: float, anchor: int) -> "TransformSpec":
        return cls(TransformKind.STRETCH, axis=axis, factor=float(factor), anchor=int(anchor))

    @classmethod
    def rotate(cls, angle: float) -> "TransformSpec":
        return cls(TransformKind.ROTATE, angle=float(angle))

    def to_json(self) -> dict[str, Any]:
        if self.kind is TransformKind.CROP:
            return {"kind": "crop", "top_left": list(self.top_left), "bottom_right": list(self.bottom_right)}
        if self.kind is TransformKind.STRETCH:
            return {"kind": "stretch", "axis": self.axis, "factor": self.factor, "anchor": self.anchor}
        return {"kind": "rotate", "angle": self.angle}

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "TransformSpec":
        kind = TransformKind(data["kind"])
        if kind is TransformKind.CROP:
            return cls.crop(tuple(data["top_left"]), tuple(data["bottom_right"]))
        if kind is TransformKind.STRETCH:
            return cls.stretch(data["axis"], data["factor"], data["anchor"])
        return cls.rotate(data["angle"])

    def label(self) -> str:
        if self.kind is TransformKind.CROP:
            return f"crop{list(self.top_left) + list(self.bottom_right)}"
        if self.kind is TransformKind.STRETCH:
            return f"stretch[{self.axis},{self.factor:.4f},{self.anchor}]"
        return f"rotate[{self.angle:g}]"


@dataclass(frozen=True, eq=False)
class TransformResult:
    """A follow-up candidate: the transform, its source-frame mask and the image."""

    spec: TransformSpec
    m_tran: BitMask
    source: Raster = field(repr=False)

    @cached_property
    def image(self) -> Raster:
        return render(self.source, self.spec)


# -- geometry -----------------------------------------------------------------

def _sample_bilinear(pixels: np.ndarray, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """Bilinear lookup at fractional (row, col) index coordinates, edge-clamped."""
    out = np.empty(rows.shape + (3,), dtype=np.float64)
    coords = np.stack([rows, cols])
    for ch in range(3):
        out[..., ch] = ndimage.map_coordinates(pixels[..., ch].astype(np.float64), coords,
                                               order=1, mode="nearest")
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def stretch_band(dim: int, factor: float, anchor: float) -> tuple[int, int]:
    """Source interval ``[start, start + length)`` that survives a stretch along one axis."""
    length = max(1, math.floor(dim / factor + _EPS))
    start = int(round(anchor * (1.0 - 1.0 / factor)))
    start = min(max(start, 0), dim - length)
    return start, length


def inscribed_size(width: int, height: int, angle_deg: float) -> tuple[int, int]:
    """Largest centered axis-aligned rectangle with the source aspect ratio inside the rotated frame.

    The size keeps the parity of the source dimensions so the rectangle stays pixel-centered.
    """
    theta = math.radians(abs(angle_deg))
    c, s = math.cos(theta), math.sin(theta)
    scale = min(width / (width * c + height * s), height / (width * s + height * c))
    w_in = math.floor(scale * width + _EPS)
    h_in = math.floor(scale * height + _EPS)
    if (width - w_in) % 2:
        w_in -= 1
    if (height - h_in) % 2:
        h_in -= 1
    return max(w_in, 1), max(h_in, 1)


def _rotation_mask(width: int, height: int, angle_deg: float) -> np.ndarray:
    w_in, h_in = inscribed_size(width, height, angle_deg)
    theta = math.radians(angle_deg)
    c, s = math.cos(theta), math.sin(theta)
    xs = np.arange(width) + 0.5 - width / 2.0
    ys = np.arange(height) + 0.5 - height / 2.0
    x, y = np.meshgrid(xs, ys)
    rx = x * c + y * s
    ry = -x * s + y * c
    return (np.abs(rx) < w_in / 2.0) & (np.abs(ry) < h_in / 2.0)


def _render_rotation(src: Raster, angle_deg: float) -> Raster:
    width, height = src.width, src.height
    w_in, h_in = inscribed_size(width, height, angle_deg)
    theta = math.radians(angle_deg)
    c, s = math.cos(theta), math.sin(theta)
    px, py = np.meshgrid(np.arange(w_in) + 0.5 - w_in / 2.0, np.arange(h_in) + 0.5 - h_in / 2.0)
    x = px * c - py * s
    y = px * s + py * c
    cols = x + width / 2.0 - 0.5
    rows = y + height / 2.0 - 0.5
    return Raster(_sample_bilinear(src.pixels, rows, cols))


def _render_stretch(src: Raster, axis: str, factor: float, anchor: int) -> Raster:
    width, height = src.width, src.height
    dim = width if axis == "horizontal" else height
    start, length = stretch_band(dim, factor, anchor)
    along = start + (np.arange(dim) + 0.5) * (length / dim) - 0.5
    if axis == "horizontal":
        rows, cols = np.meshgrid(np.arange(height, dtype=np.float64), along, indexing="ij")
    else:
        rows, cols = np.meshgrid(along, np.arange(width, dtype=np.float64), indexing="ij")
    return Raster(_sample_bilinear(src.pixels, rows, cols))


def render(src: Raster, spec: TransformSpec) -> Raster:
    """Produce the follow-up image for ``spec`` applied to ``src``."""
    if spec.kind is TransformKind.CROP:
        (x0, y0), (x1, y1) = spec.top_left, spec.bottom_right
        return Raster(src.pixels[y0:y1, x0:x1])
    if spec.kind is TransformKind.STRETCH:
        return _render_stretch(src, spec.axis, spec.factor, spec.anchor)
    return _render_rotation(src, spec.angle)


# -- guideline checks ----------------------------------------------------------

def check_crop(box: BBox, width: int, height: int, mean_od_area: float | None = None) -> None:
    if not box.within(width, height):
        raise InputDomainError(f"crop {box.as_list()} exceeds {width}x{height} frame")
    if mean_od_area is not None and not box.area > mean_od_area:
        raise GuidelineViolation(
            f"crop area {box.area} must exceed mean detected-object area {mean_od_area:g}")


def check_stretch(factor: float, anchor: float, dim: int) -> None:
    if not (factor > 1.0 and factor <= MAX_STRETCH_FACTOR + _EPS):
        raise GuidelineViolation(
            f"stretch factor {factor:g} must lie in (1, {MAX_STRETCH_FACTOR:.4f}] "
            f"(retained proportion >= {MIN_STRETCH_RETAIN})")
    if not 0 <= anchor <= dim:
        raise InputDomainError(f"stretch anchor {anchor} outside [0, {dim}]")


def check_rotation(angle: float) -> None:
    if angle == 0 or abs(angle) > MAX_ROTATION_DEG:
        raise GuidelineViolation(
            f"rotation angle {angle:g} must lie in [-{MAX_ROTATION_DEG}, {MAX_ROTATION_DEG}] and be nonzero")


def check_guideline(spec: TransformSpec, width: int, height: int, mean_od_area: float | None = None) -> None:
    """Raise unless ``spec`` satisfies its reduction guideline on a ``width`` x ``height`` source."""
    if spec.kind is TransformKind.CROP:
        check_crop(BBox(*spec.top_left, *spec.bottom_right), width, height, mean_od_area)
    elif spec.kind is TransformKind.STRETCH:
        dim = width if spec.axis == "horizontal" else height
        check_stretch(spec.factor, spec.anchor, dim)
    else:
        check_rotation(spec.angle)


# -- the three transformations ---------------------------------------------------

def apply_crop(src: Raster, top_left: tuple[int, int], bottom_right: tuple[int, int],
               mean_od_area: float | None = None) -> TransformResult:
    x0, y0 = top_left
    x1, y1 = bottom_right
    if x1 <= x0 or y1 <= y0:
        raise InputDomainError(f"degenerate crop {[x0, y0, x1, y1]}")
    box = BBox(x0, y0, x1, y1)
    check_crop(box, src.width, src.height, mean_od_area)
    bits = np.zeros(src.shape, dtype=bool)
    bits[box.slices()] = True
    return TransformResult(TransformSpec.crop((x0, y0), (x1, y1)), BitMask(bits), src)


def apply_stretch(src: Raster, axis: str, factor: float, anchor: int) -> TransformResult:
    if axis not in ("horizontal", "vertical"):
        raise InputDomainError(f"unknown stretch axis {axis!r}")
    dim = src.width if axis == "horizontal" else src.height
    check_stretch(factor, anchor, dim)
    start, length = stretch_band(dim, factor, anchor)
    bits = np.zeros(src.shape, dtype=bool)
    if axis == "horizontal":
        bits[:, start:start + length] = True
    else:
        bits[start:start + length, :] = True
    return TransformResult(TransformSpec.stretch(axis, factor, anchor), BitMask(bits), src)


def apply_rotate(src: Raster, angle: float) -> TransformResult:
    check_rotation(angle)
    bits = _rotation_mask(src.width, src.height, angle)
    return TransformResult(TransformSpec.rotate(angle), BitMask(bits), src)


def apply(src: Raster, spec: TransformSpec) -> TransformResult:
    if spec.kind is TransformKind.CROP:
        return apply_crop(src, spec.top_left, spec.bottom_right)
    if spec.kind is TransformKind.STRETCH:
        return apply_stretch(src, spec.axis, spec.factor, spec.anchor)
    return apply_rotate(src, spec.angle)


# -- candidate pools ---------------------------------------------------------------

def default_mean_area(width: int, height: int) -> float:
    """Fallback mean object area when the detector finds nothing."""
    return DEFAULT_AREA_FRACTION * width * height


def crop_top_left_points(width: int, height: int, seed: int) -> list[tuple[int, int]]:
    """Ten top-left points drawn from a uniform lattice; the origin is always included."""
    lattice = [(math.floor(i * width / CROP_LATTICE), math.floor(j * height / CROP_LATTICE))
               for j in range(CROP_LATTICE) for i in range(CROP_LATTICE)]
    lattice = list(dict.fromkeys(lattice))
    rest = lattice[1:]
    rng = np.random.default_rng(seed)
    picks = rng.choice(len(rest), size=min(CROP_TOP_LEFT_POINTS - 1, len(rest)), replace=False)
    return [lattice[0]] + [rest[i] for i in sorted(picks)]


def _stride_ends(start: int, dim: int) -> list[int]:
    stride = max(1, dim // 10)
    return sorted(range(dim, start, -stride))


def stretch_factors() -> list[float]:
    steps = round((MAX_STRETCH_FACTOR - 1.0) / STRETCH_FACTOR_STEP)
    return [1.0 + j * STRETCH_FACTOR_STEP for j in range(1, steps + 1)]


def generate_candidates(src: Raster, mean_od_area: float, kind: TransformKind | str,
                        seed: int = 0) -> list[TransformResult]:
    """Enumerate the guideline-satisfying candidate pool for one transformation kind."""
    kind = TransformKind(kind)
    width, height = src.width, src.height
    if kind is TransformKind.ROTATE:
        angles = [a for a in range(-MAX_ROTATION_DEG, MAX_ROTATION_DEG + 1) if a != 0]
        return [apply_rotate(src, a) for a in angles]
    if kind is TransformKind.STRETCH:
        out = []
        for axis, dim in (("horizontal", width), ("vertical", height)):
            for factor in stretch_factors():
                for anchor in dict.fromkeys((0, dim // 2, dim)):
                    out.append(apply_stretch(src, axis, factor, anchor))
        return out
    if not mean_od_area > 0:
        raise InputDomainError(f"mean detected-object area must be positive, got {mean_od_area}")
    out = []
    for x0, y0 in crop_top_left_points(width, height, seed):
        for x1 in _stride_ends(x0, width):
            for y1 in _stride_ends(y0, height):
                if (x1 - x0) * (y1 - y0) > mean_od_area:
                    out.append(apply_crop(src, (x0, y0), (x1, y1)))
    return out
