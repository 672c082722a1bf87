"""The four external model roles: captioner (system under test), detector, inpainter, tagger.

Each role is a small duck-typed interface.  Remote clients wrap a transport and speak
the fixed wire schema; builtins cover inpainting and tagging with no external service.
"""

from __future__ import annotations

import hashlib
import threading
from dataclasses import dataclass
from typing import Any, Protocol

import numpy as np

from ..caption_analysis import LexiconTagger
from ..errors import AdapterError, InputDomainError
from ..imagery import BBox, Raster
from .transport import Transport, decode_image, encode_image


@dataclass(frozen=True)
class Detection:
    label: str
    score: float
    box: BBox

    def __post_init__(self) -> None:
        if not 0.0 <= self.score <= 1.0:
            raise InputDomainError(f"detection score {self.score} outside [0, 1]")

    def to_json(self) -> dict[str, Any]:
        return {"label": self.label, "score": self.score, "box": self.box.as_list()}

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "Detection":
        return cls(str(data["label"]).lower(), float(data["score"]), BBox.from_list(data["box"]))


class Captioner(Protocol):
    def caption(self, image: Raster) -> str: ...


class Detector(Protocol):
    def detect(self, image: Raster) -> list[Detection]: ...


class Inpainter(Protocol):
    def inpaint(self, image: Raster, region: BBox) -> Raster: ...


class Tagger(Protocol):
    def tag(self, text: str) -> list[tuple[str, str, str]]: ...


# -- remote clients ------------------------------------------------------------------

def _field(response: dict[str, Any], name: str, kind: type, role: str) -> Any:
    value = response.get(name)
    if not isinstance(value, kind):
        raise AdapterError(f"{role} response lacks a valid {name!r} field", payload=response, role=role)
    return value


class RemoteCaptioner:
    """``{"id", "image_png_b64"} -> {"id", "caption"}``"""

    def __init__(self, transport: Transport):
        self.transport = transport
        transport.role = "sut"

    def caption(self, image: Raster) -> str:
        resp = self.transport.request({"image_png_b64": encode_image(image)})
        return _field(resp, "caption", str, "sut")


class RemoteDetector:
    """``{"id", "image_png_b64"} -> {"id", "objects": [{"label", "score", "box"}]}``"""

    def __init__(self, transport: Transport):
        self.transport = transport
        transport.role = "od"

    def detect(self, image: Raster) -> list[Detection]:
        resp = self.transport.request({"image_png_b64": encode_image(image)})
        objects = _field(resp, "objects", list, "od")
        try:
            dets = [Detection.from_json(o) for o in objects]
        except (KeyError, TypeError, ValueError) as exc:
            raise AdapterError(f"malformed detection: {exc}", payload=resp, role="od") from exc
        for d in dets:
            if not d.box.within(image.width, image.height):
                raise AdapterError(f"detection box {d.box.as_list()} outside image", payload=resp, role="od")
        return dets


class RemoteInpainter:
    """``{"id", "image_png_b64", "box"} -> {"id", "image_png_b64"}``

    With ``check_contract`` the reply is rejected if any pixel outside ``region`` changed.
    """

    def __init__(self, transport: Transport, check_contract: bool = True):
        self.transport = transport
        self.check_contract = check_contract
        transport.role = "inpaint"

    def inpaint(self, image: Raster, region: BBox) -> Raster:
        resp = self.transport.request({"image_png_b64": encode_image(image), "box": region.as_list()})
        out = decode_image(_field(resp, "image_png_b64", str, "inpaint"))
        if out.shape != image.shape:
            raise AdapterError("inpainted image changed dimensions", payload=None, role="inpaint")
        if self.check_contract:
            check_outside_unchanged(image, out, region)
        return out


class RemoteTagger:
    """``{"id", "text"} -> {"id", "tokens": [{"t", "pos", "lemma"}]}``"""

    def __init__(self, transport: Transport):
        self.transport = transport
        transport.role = "pos"

    def tag(self, text: str) -> list[tuple[str, str, str]]:
        resp = self.transport.request({"text": text})
        tokens = _field(resp, "tokens", list, "pos")
        try:
            return [(str(t["t"]), str(t["pos"]), str(t["lemma"])) for t in tokens]
        except (KeyError, TypeError) as exc:
            raise AdapterError(f"malformed token: {exc}", payload=resp, role="pos") from exc


def check_outside_unchanged(before: Raster, after: Raster, region: BBox) -> None:
    outside = np.ones(before.shape, dtype=bool)
    outside[region.slices()] = False
    if not np.array_equal(before.pixels[outside], after.pixels[outside]):
        raise AdapterError(f"inpainting modified pixels outside {region.as_list()}", role="inpaint")


# -- builtins -------------------------------------------------------------------------

def ring_mean(image: Raster, region: BBox) -> np.ndarray:
    """Mean color of the 1-pixel ring just outside ``region``.

    When the region covers the whole image the ring is empty and the image's own border
    ring is used instead.
    """
    px = image.pixels.astype(np.float64)
    h, w = image.shape
    x0, y0 = max(region.x0 - 1, 0), max(region.y0 - 1, 0)
    x1, y1 = min(region.x1 + 1, w), min(region.y1 + 1, h)
    ring = np.zeros((h, w), dtype=bool)
    ring[y0:y1, x0:x1] = True
    ring[region.slices()] = False
    if not ring.any():
        ring[0, :] = ring[-1, :] = ring[:, 0] = ring[:, -1] = True
    return px[ring].mean(axis=0)


class BuiltinInpainter:
    """Fills the region with the mean color of its outer ring."""

    def inpaint(self, image: Raster, region: BBox) -> Raster:
        if not region.within(image.width, image.height):
            raise InputDomainError(f"inpaint region {region.as_list()} outside image")
        out = image.pixels.copy()
        out[region.slices()] = np.rint(ring_mean(image, region)).astype(np.uint8)
        return Raster(out)


class BuiltinTagger:
    def __init__(self, tagger: LexiconTagger | None = None):
        self._tagger = tagger or LexiconTagger.load()

    def tag(self, text: str) -> list[tuple[str, str, str]]:
        return self._tagger.tag(text)


def image_digest(image: Raster) -> str:
    h = hashlib.sha256()
    h.update(repr(image.pixels.shape).encode())
    h.update(image.pixels.tobytes())
    return h.hexdigest()


class CachedCaptioner:
    """Memoizes captions by image content; assumes the wrapped system is deterministic per image."""

    def __init__(self, inner: Captioner):
        self.inner = inner
        self._cache: dict[str, str] = {}
        self._lock = threading.Lock()
        self.calls = 0
        self.hits = 0

    def caption(self, image: Raster) -> str:
        key = image_digest(image)
        with self._lock:
            if key in self._cache:
                self.hits += 1
                return self._cache[key]
        text = self.inner.caption(image)
        with self._lock:
            self.calls += 1
            self._cache[key] = text
        return text


class CountingCaptioner:
    """Counts calls to the wrapped captioner (used to verify stage short-circuits)."""

    def __init__(self, inner: Captioner):
        self.inner = inner
        self.calls = 0
        self._lock = threading.Lock()

    def caption(self, image: Raster) -> str:
        with self._lock:
            self.calls += 1
        return self.inner.caption(image)


# -- spec-level entry points ------------------------------------------------------------

def caption_image(endpoint: Captioner, image: Raster) -> str:
    return endpoint.caption(image)


def detect_objects(endpoint: Detector, image: Raster) -> list[Detection]:
    return endpoint.detect(image)


def inpaint_region(endpoint: Inpainter | None, image: Raster, region: BBox) -> Raster:
    return (endpoint or BuiltinInpainter()).inpaint(image, region)


def tag_tokens(endpoint: Tagger | None, text: str) -> list[tuple[str, str, str]]:
    return (endpoint or BuiltinTagger()).tag(text)
