"""Raster and binary-mask primitives plus the set algebra used by every score.

Coordinates are integer pixel indices. Boxes are half-open: ``[x0, x1) x [y0, y1)``.
Arrays are stored row-major as ``(height, width[, 3])`` and frozen after construction.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from PIL import Image

from .errors import InputDomainError


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Raster:
    """An 8-bit RGB image, ``pixels.shape == (height, width, 3)``."""

    pixels: np.ndarray

    def __post_init__(self) -> None:
        px = np.asarray(self.pixels)
        if px.ndim != 3 or px.shape[2] != 3:
            raise InputDomainError(f"raster must be (H, W, 3), got shape {px.shape}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise InputDomainError(f"raster dimensions must be >= 1, got {px.shape[1]}x{px.shape[0]}")
        if px.dtype != np.uint8:
            px = np.clip(np.rint(px), 0, 255).astype(np.uint8)
        object.__setattr__(self, "pixels", _frozen(px))

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])

    @property
    def shape(self) -> tuple[int, int]:
        """``(height, width)``, the shape shared with masks over this raster."""
        return self.height, self.width

    @classmethod
    def filled(cls, width: int, height: int, color: Sequence[int]) -> "Raster":
        px = np.empty((height, width, 3), dtype=np.uint8)
        px[:] = np.asarray(color, dtype=np.uint8)
        return cls(px)

    @classmethod
    def from_png(cls, source: str | Path | bytes) -> "Raster":
        """Load a PNG (or any Pillow-readable file); alpha is discarded."""
        if isinstance(source, (bytes, bytearray)):
            img = Image.open(io.BytesIO(source))
        else:
            img = Image.open(source)
        with img:
            return cls(np.array(img.convert("RGB"), dtype=np.uint8))

    def to_png_bytes(self) -> bytes:
        buf = io.BytesIO()
        Image.fromarray(self.pixels, mode="RGB").save(buf, format="PNG", compress_level=6)
        return buf.getvalue()

    def save_png(self, path: str | Path) -> None:
        Path(path).write_bytes(self.to_png_bytes())

    def with_pixels(self, pixels: np.ndarray) -> "Raster":
        return Raster(pixels)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Raster):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and bool(np.array_equal(self.pixels, other.pixels))

    def __hash__(self) -> int:
        return hash((self.pixels.shape, self.pixels.tobytes()))


@dataclass(frozen=True, eq=False)
class BitMask:
    """Binary matrix over an image frame, ``bits.shape == (height, width)``."""

    bits: np.ndarray

    def __post_init__(self) -> None:
        bits = np.asarray(self.bits)
        if bits.ndim != 2:
            raise InputDomainError(f"mask must be 2-D, got shape {bits.shape}")
        object.__setattr__(self, "bits", _frozen(bits.astype(bool, copy=False)))

    @property
    def width(self) -> int:
        return int(self.bits.shape[1])

    @property
    def height(self) -> int:
        return int(self.bits.shape[0])

    @property
    def shape(self) -> tuple[int, int]:
        return self.height, self.width

    @classmethod
    def zeros(cls, width: int, height: int) -> "BitMask":
        return cls(np.zeros((height, width), dtype=bool))

    @classmethod
    def ones(cls, width: int, height: int) -> "BitMask":
        return cls(np.ones((height, width), dtype=bool))

    def to_pbm(self) -> bytes:
        """Serialize as binary PBM (P4); set bits are written as 1 (black)."""
        header = f"P4\n{self.width} {self.height}\n".encode("ascii")
        return header + np.packbits(self.bits, axis=1).tobytes()

    @classmethod
    def from_pbm(cls, data: bytes) -> "BitMask":
        fields: list[bytes] = []
        pos = 0
        while len(fields) < 3:
            while data[pos:pos + 1].isspace():
                pos += 1
            if data[pos:pos + 1] == b"#":
                pos = data.index(b"\n", pos) + 1
                continue
            start = pos
            while not data[pos:pos + 1].isspace():
                pos += 1
            fields.append(data[start:pos])
        if fields[0] != b"P4":
            raise InputDomainError("not a binary PBM (P4) stream")
        width, height = int(fields[1]), int(fields[2])
        pos += 1
        row_bytes = (width + 7) // 8
        packed = np.frombuffer(data, dtype=np.uint8, count=row_bytes * height, offset=pos)
        bits = np.unpackbits(packed.reshape(height, row_bytes), axis=1)[:, :width]
        return cls(bits.astype(bool))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BitMask):
            return NotImplemented
        return self.bits.shape == other.bits.shape and bool(np.array_equal(self.bits, other.bits))

    def __hash__(self) -> int:
        return hash((self.bits.shape, np.packbits(self.bits).tobytes()))


@dataclass(frozen=True, order=True)
class BBox:
    """Half-open pixel box ``[x0, x1) x [y0, y1)``."""

    x0: int
    y0: int
    x1: int
    y1: int

    def __post_init__(self) -> None:
        for name in ("x0", "y0", "x1", "y1"):
            object.__setattr__(self, name, int(getattr(self, name)))
        if self.x0 < 0 or self.y0 < 0 or self.x0 >= self.x1 or self.y0 >= self.y1:
            raise InputDomainError(f"degenerate or negative box {self.as_list()}")

    @classmethod
    def from_list(cls, coords: Sequence[float]) -> "BBox":
        if len(coords) != 4:
            raise InputDomainError(f"box needs 4 coordinates, got {list(coords)}")
        return cls(*(int(round(c)) for c in coords))

    def as_list(self) -> list[int]:
        return [self.x0, self.y0, self.x1, self.y1]

    @property
    def width(self) -> int:
        return self.x1 - self.x0

    @property
    def height(self) -> int:
        return self.y1 - self.y0

    @property
    def area(self) -> int:
        return self.width * self.height

    def within(self, width: int, height: int) -> bool:
        return self.x1 <= width and self.y1 <= height

    def contains(self, other: "BBox") -> bool:
        return (self.x0 <= other.x0 and self.y0 <= other.y0
                and self.x1 >= other.x1 and self.y1 >= other.y1)

    def iou(self, other: "BBox") -> float:
        ix = max(0, min(self.x1, other.x1) - max(self.x0, other.x0))
        iy = max(0, min(self.y1, other.y1) - max(self.y0, other.y0))
        inter = ix * iy
        return inter / (self.area + other.area - inter)

    def slices(self) -> tuple[slice, slice]:
        """Row/column slices for indexing an ``(H, W, ...)`` array."""
        return slice(self.y0, self.y1), slice(self.x0, self.x1)


def mask_from_boxes(boxes: Iterable[BBox], width: int, height: int) -> BitMask:
    """Union of ``boxes`` rasterized onto a ``width`` x ``height`` frame."""
    bits = np.zeros((height, width), dtype=bool)
    for box in boxes:
        if not box.within(width, height):
            raise InputDomainError(f"box {box.as_list()} exceeds {width}x{height} frame")
        bits[box.slices()] = True
    return BitMask(bits)


def mask_count(m: BitMask) -> int:
    return int(np.count_nonzero(m.bits))


def _check_same_shape(a: BitMask, b: BitMask) -> None:
    if a.shape != b.shape:
        raise InputDomainError(f"mask dimensions differ: {a.width}x{a.height} vs {b.width}x{b.height}")


def mask_intersection_count(a: BitMask, b: BitMask) -> int:
    _check_same_shape(a, b)
    return int(np.count_nonzero(a.bits & b.bits))


def mask_union_count(a: BitMask, b: BitMask) -> int:
    _check_same_shape(a, b)
    return int(np.count_nonzero(a.bits | b.bits))


def remove_included_boxes(boxes: Sequence[BBox]) -> list[BBox]:
    """Drop every box that contains another box, keeping the inner one.

    Identical boxes count as mutual inclusion; the earliest copy survives.
    Survivors keep their input order.
    """
    kept = []
    for i, box in enumerate(boxes):
        dominated = False
        for j, other in enumerate(boxes):
            if i == j or not box.contains(other):
                continue
            if box != other or j < i:
                dominated = True
                break
        if not dominated:
            kept.append(box)
    return kept
