"""Locate caption objects in the source image.

Objects whose name matches a detector label take the detector boxes.  The rest are
located by occlusion: each detector box is hidden three ways (Gaussian blur, black fill,
inpainting) and the box counts as the object's position only when the object vanishes
from the captions of all three variants.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np
from scipy.ndimage import gaussian_filter

from .adapters.roles import BuiltinInpainter, BuiltinTagger, Captioner, Detection, Detector, Inpainter, Tagger
from .caption_analysis import Caption, NounPhrase, SemanticMatcher, contains_object, extract_objects
from .errors import AdapterError
from .imagery import BBox, BitMask, Raster, mask_from_boxes, remove_included_boxes

DEFAULT_OD_SCORE = 0.3
OCCLUSION_METHODS = ("blur", "black", "inpaint")

SOURCE_OD = "od"
SOURCE_OCCLUSION = "occlusion"


@dataclass(frozen=True)
class LocalizationEntry:
    obj: NounPhrase
    mask: BitMask
    source: str
    regions: tuple[BBox, ...]

    def to_json(self) -> dict:
        return {"object": self.obj.key, "span": list(self.obj.span), "source": self.source,
                "regions": [r.as_list() for r in self.regions]}


@dataclass(frozen=True)
class LocalizationMap:
    """Every caption object exactly once, either located (``entries``) or ``unlocated``."""

    objects: tuple[NounPhrase, ...] = ()
    entries: tuple[LocalizationEntry, ...] = ()
    unlocated: tuple[NounPhrase, ...] = ()

    def __post_init__(self) -> None:
        placed = [e.obj for e in self.entries] + list(self.unlocated)
        if sorted(o.span for o in placed) != sorted(o.span for o in self.objects):
            raise ValueError("localization map must place every caption object exactly once")

    def entry(self, obj: NounPhrase) -> LocalizationEntry | None:
        for e in self.entries:
            if e.obj == obj:
                return e
        return None

    def __iter__(self) -> Iterator[LocalizationEntry]:
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.objects)

    def to_json(self) -> dict:
        return {"entries": [e.to_json() for e in self.entries],
                "unlocated": [{"object": o.key, "span": list(o.span)} for o in self.unlocated]}


@lru_cache(maxsize=1)
def default_tagger() -> BuiltinTagger:
    return BuiltinTagger()


def parse_caption(text: str, tagger: Tagger | None = None) -> Caption:
    return Caption.from_tagged(text, (tagger or default_tagger()).tag(text))


def caption_objects(text: str, tagger: Tagger | None = None) -> list[NounPhrase]:
    return extract_objects(parse_caption(text, tagger))


# -- occlusion operators ------------------------------------------------------------

def blur_radius(box: BBox) -> int:
    return max(5, math.ceil(min(box.width, box.height) / 4))


def gaussian_blur_region(image: Raster, box: BBox) -> Raster:
    """Blur inside ``box`` only; the kernel never reads pixels outside the box."""
    radius = blur_radius(box)
    sigma = radius / 2
    px = image.pixels.astype(np.float64)
    sub = px[box.slices()]
    for c in range(3):
        sub[..., c] = gaussian_filter(sub[..., c], sigma, mode="nearest", truncate=radius / sigma)
    out = image.pixels.copy()
    out[box.slices()] = np.clip(np.rint(sub), 0, 255).astype(np.uint8)
    return Raster(out)


def black_fill(image: Raster, box: BBox) -> Raster:
    out = image.pixels.copy()
    out[box.slices()] = 0
    return Raster(out)


def occlusion_variants(image: Raster, box: BBox, inpainter: Inpainter | None = None) -> dict[str, Raster]:
    return {
        "blur": gaussian_blur_region(image, box),
        "black": black_fill(image, box),
        "inpaint": (inpainter or BuiltinInpainter()).inpaint(image, box),
    }


class OcclusionProbe:
    """Captions of the three occluded variants of each box, computed once per box."""

    def __init__(self, src: Raster, sut: Captioner, inpainter: Inpainter | None = None,
                 tagger: Tagger | None = None, max_workers: int = 3):
        self.src = src
        self.sut = sut
        self.inpainter = inpainter
        self.tagger = tagger
        self.max_workers = max(1, max_workers)
        self._cache: dict[BBox, dict[str, list[NounPhrase]]] = {}

    def objects_for(self, box: BBox) -> dict[str, list[NounPhrase]]:
        if box in self._cache:
            return self._cache[box]
        try:
            variants = occlusion_variants(self.src, box, self.inpainter)
        except AdapterError as exc:
            raise AdapterError(f"inpaint variant of box {box.as_list()} failed: {exc}",
                               payload=exc.payload, role=exc.role) from exc
        with ThreadPoolExecutor(min(self.max_workers, len(variants))) as pool:
            futures = {name: pool.submit(self.sut.caption, img) for name, img in variants.items()}
            texts = {}
            for name, fut in futures.items():
                try:
                    texts[name] = fut.result()
                except AdapterError as exc:
                    raise AdapterError(f"captioning the {name} variant of box {box.as_list()} failed: {exc}",
                                       payload=exc.payload, role=exc.role) from exc
        result = {name: caption_objects(texts[name], self.tagger) for name in OCCLUSION_METHODS}
        self._cache[box] = result
        return result


# -- alignment ------------------------------------------------------------------------

def _label_matches(obj: NounPhrase, label: str, m: SemanticMatcher) -> bool:
    label = label.lower().strip()
    if label == obj.phrase_lemma:
        return True
    return m.same_category(obj.lemma, label.split()[-1]) if label else False


def usable_detections(detections: Sequence[Detection], min_score: float = DEFAULT_OD_SCORE) -> list[Detection]:
    return [d for d in detections if d.score >= min_score]


def align_by_detection(objects: Sequence[NounPhrase], detections: Sequence[Detection], m: SemanticMatcher,
                       width: int, height: int, min_score: float = DEFAULT_OD_SCORE
                       ) -> tuple[list[LocalizationEntry], list[NounPhrase]]:
    """Match caption objects to detections; returns (located entries, unmatched objects)."""
    dets = usable_detections(detections, min_score)
    located, unmatched = [], []
    for obj in objects:
        boxes = [d.box for d in dets if _label_matches(obj, d.label, m)]
        if boxes:
            located.append(LocalizationEntry(obj, mask_from_boxes(boxes, width, height), SOURCE_OD, tuple(boxes)))
        else:
            unmatched.append(obj)
    return located, unmatched


def occlusion_localize(obj: NounPhrase, src: Raster, boxes: Sequence[BBox], sut: Captioner,
                       inpainter: Inpainter | None, m: SemanticMatcher, tagger: Tagger | None = None,
                       probe: OcclusionProbe | None = None) -> tuple[BitMask, list[BBox]] | None:
    """Return (mask, regions) for ``obj`` or ``None`` when no box hides it in all three variants."""
    probe = probe or OcclusionProbe(src, sut, inpainter, tagger)
    regions = []
    for box in boxes:
        captions = probe.objects_for(box)
        if all(not contains_object(captions[name], obj, m) for name in OCCLUSION_METHODS):
            regions.append(box)
    regions = remove_included_boxes(regions)
    if not regions:
        return None
    return mask_from_boxes(regions, src.width, src.height), regions


def build_localization_map(caption: Caption, src: Raster, od: Detector | Sequence[Detection], sut: Captioner,
                           inpainter: Inpainter | None, m: SemanticMatcher, tagger: Tagger | None = None,
                           min_score: float = DEFAULT_OD_SCORE, max_workers: int = 3) -> LocalizationMap:
    objects = extract_objects(caption)
    if not objects:
        return LocalizationMap()
    detections = list(od) if isinstance(od, (list, tuple)) else od.detect(src)
    located, unmatched = align_by_detection(objects, detections, m, src.width, src.height, min_score)
    unlocated = []
    if unmatched:
        boxes = [d.box for d in usable_detections(detections, min_score)]
        probe = OcclusionProbe(src, sut, inpainter, tagger, max_workers)
        for obj in unmatched:
            found = occlusion_localize(obj, src, boxes, sut, inpainter, m, tagger, probe)
            if found is None:
                unlocated.append(obj)
            else:
                located.append(LocalizationEntry(obj, found[0], SOURCE_OCCLUSION, tuple(found[1])))
    located.sort(key=lambda e: e.obj.span)
    return LocalizationMap(tuple(objects), tuple(located), tuple(unlocated))


def dump_localization(loc: LocalizationMap, directory: str | Path, stem: str) -> Path:
    """Write one PBM per located object plus ``<stem>.json`` indexing them."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    index = loc.to_json()
    for i, entry in enumerate(loc.entries):
        name = f"{stem}_{i}.pbm"
        (directory / name).write_bytes(entry.mask.to_pbm())
        index["entries"][i]["mask"] = name
    path = directory / f"{stem}.json"
    path.write_text(json.dumps(index, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return path
