"""Seeded synthetic corpora for simulator runs."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..adapters.simulator import VOCABULARY, DetectorSpec, FaultSpec, SyntheticScene, random_scene, write_scene
from ..errors import ConfigError

FAULT_PLANS = ("none", "omit", "misclassify", "fabricate", "mixed")


def scene_fault(scene: SyntheticScene, mode: str, rng: np.random.Generator) -> FaultSpec:
    labels = scene.labels()
    if mode == "none" or not labels:
        return FaultSpec()
    if mode == "omit":
        return FaultSpec.omit(str(rng.choice(labels)))
    if mode == "misclassify":
        outside = [l for l in VOCABULARY if l not in labels]
        return FaultSpec.misclassify(str(rng.choice(labels)), str(rng.choice(outside)))
    if mode == "fabricate":
        trigger, fabricated = (str(l) for l in rng.choice(labels, size=2, replace=False))
        return FaultSpec.fabricate(trigger, fabricated)
    raise ConfigError(f"unknown fault plan {mode!r}")


def make_corpus(directory: str | Path, n: int, seed: int = 0, faults: str = "none", relabel_rate: float = 0.0,
                jitter: int = 0, width: int = 96, height: int = 96) -> list[Path]:
    """Write ``n`` scenes as ``scene_000.png`` plus sidecars.

    ``faults`` picks the captioner fault per scene (``mixed`` cycles through all modes).
    ``relabel_rate`` is the chance that the detector reports an object under a label no
    caption will match, which forces occlusion-based localization for it.
    """
    if faults not in FAULT_PLANS:
        raise ConfigError(f"fault plan must be one of {FAULT_PLANS}")
    if n < 1:
        raise ConfigError("corpus size must be positive")
    rng = np.random.default_rng(seed)
    cycle = FAULT_PLANS[:4]
    paths = []
    for i in range(n):
        scene = random_scene(rng, width, height)
        mode = cycle[i % 4] if faults == "mixed" else faults
        fault = scene_fault(scene, mode, rng)
        relabel = {l: "thing" for l in scene.labels() if rng.random() < relabel_rate}
        det = DetectorSpec(jitter=jitter, seed=seed + i, relabel=relabel)
        paths.append(write_scene(directory, f"scene_{i:03d}", scene, fault, det))
    return paths
