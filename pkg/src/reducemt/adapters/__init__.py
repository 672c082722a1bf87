"""Adapters to the external model roles plus the synthetic simulator."""

from .roles import (
    BuiltinInpainter,
    BuiltinTagger,
    CachedCaptioner,
    Captioner,
    CountingCaptioner,
    Detection,
    Detector,
    Inpainter,
    RemoteCaptioner,
    RemoteDetector,
    RemoteInpainter,
    RemoteTagger,
    Tagger,
    caption_image,
    check_outside_unchanged,
    detect_objects,
    image_digest,
    inpaint_region,
    ring_mean,
    tag_tokens,
)
from .simulator import (
    PALETTE,
    VOCABULARY,
    DetectorSpec,
    FaultSpec,
    SceneObject,
    SimulatedCaptioner,
    SimulatedDetector,
    SyntheticScene,
    is_source_frame,
    random_scene,
    simulate,
    visible_fraction,
)
from .transport import HttpTransport, JsonLinesTransport, Transport, decode_image, encode_image

__all__ = [
    "BuiltinInpainter", "BuiltinTagger", "CachedCaptioner", "Captioner", "CountingCaptioner",
    "Detection", "Detector", "Inpainter", "RemoteCaptioner", "RemoteDetector", "RemoteInpainter",
    "RemoteTagger", "Tagger", "caption_image", "check_outside_unchanged", "detect_objects",
    "image_digest", "inpaint_region", "ring_mean", "tag_tokens",
    "PALETTE", "VOCABULARY", "DetectorSpec", "FaultSpec", "SceneObject", "SimulatedCaptioner",
    "SimulatedDetector", "SyntheticScene", "is_source_frame", "random_scene", "simulate",
    "visible_fraction",
    "HttpTransport", "JsonLinesTransport", "Transport", "decode_image", "encode_image",
]
