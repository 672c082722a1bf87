"""End-to-end run: caption, localize, generate and select follow-ups, check the rules, persist."""

from __future__ import annotations

import hashlib
import json
import logging
import shutil
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from ..adapters.roles import (
    BuiltinInpainter,
    BuiltinTagger,
    CachedCaptioner,
    Captioner,
    Detection,
    Detector,
    Inpainter,
    RemoteCaptioner,
    RemoteDetector,
    RemoteInpainter,
    RemoteTagger,
    Tagger,
)
from ..adapters.simulator import SimulatedCaptioner, SimulatedDetector, load_sidecar
from ..adapters.transport import HttpTransport, JsonLinesTransport, Transport
from ..alignment import LocalizationMap, build_localization_map, dump_localization, parse_caption, usable_detections
from ..caption_analysis import Caption, SemanticMatcher
from ..errors import AdapterError, ConfigError, InputDomainError
from ..imagery import Raster
from ..oracle import MetamorphicPair, assess_mp
from ..selection import CandidateAssessment, Fate, assess_candidate, select_assessments
from ..transforms import TransformKind, default_mean_area, generate_candidates
from .config import ROLES, EndpointConfig, RunConfig

log = logging.getLogger(__name__)

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp")
RUN_FILES = ("manifest.json", "mps.jsonl", "violations.jsonl", "sources.jsonl", "report.html", "report.json")
RUN_DIRS = ("images", "masks", "traces")


def list_images(directory: Path) -> list[Path]:
    if not directory.is_dir():
        raise ConfigError(f"image directory {directory} does not exist")
    images = sorted(p for p in directory.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES and p.is_file())
    if not images:
        raise ConfigError(f"image directory {directory} contains no images")
    return images


def _transport(ep: EndpointConfig, role: str) -> Transport:
    kw = dict(timeout=ep.timeout, retries=ep.retries, max_in_flight=ep.max_in_flight)
    if ep.kind == "jsonl":
        return JsonLinesTransport(ep.command, role, **kw)
    return HttpTransport(ep.url, role, **kw)


@dataclass
class SourceAdapters:
    sut: Captioner
    od: Detector
    inpaint: Inpainter


class RunContext:
    """Shared state for a run: matcher, tagger and any remote endpoints."""

    def __init__(self, config: RunConfig):
        self.config = config
        if config.literal_matching:
            self.matcher = SemanticMatcher.literal()
        else:
            self.matcher = SemanticMatcher.load(config.vectors, config.hypernyms, config.cosine)
        self._transports: list[Transport] = []
        self.remote: dict[str, Any] = {}
        for role in ROLES:
            ep = config.endpoint(role)
            if ep.kind in ("jsonl", "http"):
                t = _transport(ep, role)
                self._transports.append(t)
                client = {"sut": RemoteCaptioner, "od": RemoteDetector,
                          "inpaint": RemoteInpainter, "pos": RemoteTagger}[role](t)
                self.remote[role] = client
        self.tagger: Tagger = self.remote.get("pos") or BuiltinTagger()
        self.inpainter: Inpainter = self.remote.get("inpaint") or BuiltinInpainter()

    def adapters_for(self, image_path: Path) -> SourceAdapters:
        cfg = self.config
        scene = fault = det_spec = None
        if cfg.simulator:
            scene, fault, det_spec = load_sidecar(image_path)
        sut = SimulatedCaptioner(scene, fault) if cfg.sut.kind == "simulator" else self.remote["sut"]
        od = SimulatedDetector(scene, det_spec) if cfg.od.kind == "simulator" else self.remote["od"]
        return SourceAdapters(CachedCaptioner(sut), od, self.inpainter)

    def close(self) -> None:
        for t in self._transports:
            t.close()

    def __enter__(self) -> "RunContext":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def _stem_seed(seed: int, stem: str) -> int:
    return (seed + zlib.crc32(stem.encode("utf-8"))) % (2**32)


def selection_rng(seed: int, stem: str, mr: str) -> np.random.Generator:
    return np.random.default_rng([seed, zlib.crc32(stem.encode("utf-8")), int(mr[-1])])


@dataclass
class PreparedSource:
    stem: str
    path: Path
    image: Raster
    caption: Caption
    detections: list[Detection]
    localization: LocalizationMap
    mean_od_area: float
    pools: dict[str, list[CandidateAssessment]]
    adapters: SourceAdapters
    skips: list[dict[str, Any]] = field(default_factory=list)


@dataclass
class SourceOutcome:
    stem: str
    prepared: PreparedSource | None = None
    pairs: list[tuple[str, MetamorphicPair]] = field(default_factory=list)
    traces: dict[str, list] = field(default_factory=dict)
    skips: list[dict[str, Any]] = field(default_factory=list)


def prepare_source(ctx: RunContext, path: Path) -> PreparedSource:
    cfg = ctx.config
    stem = path.stem
    image = Raster.from_png(path)
    adapters = ctx.adapters_for(path)
    caption = parse_caption(adapters.sut.caption(image), ctx.tagger)
    detections = adapters.od.detect(image)
    loc = build_localization_map(caption, image, detections, adapters.sut, adapters.inpaint, ctx.matcher,
                                 ctx.tagger, cfg.od_score)
    usable = usable_detections(detections, cfg.od_score)
    mean_area = (float(np.mean([d.box.area for d in usable])) if usable
                 else default_mean_area(image.width, image.height))
    pools: dict[str, list[CandidateAssessment]] = {}
    skips = []
    for mr in cfg.mrs:
        kind = TransformKind.from_mr(mr)
        candidates = generate_candidates(image, mean_area, kind, seed=_stem_seed(cfg.seed, stem))
        if not candidates:
            skips.append({"source": stem, "mr": mr, "kind": "empty_pool",
                          "error": f"no {kind.value} candidate satisfies its guideline"})
            continue
        pools[mr] = [assess_candidate(c, loc, i, cfg.t_down, cfg.t_up) for i, c in enumerate(candidates)]
    return PreparedSource(stem, path, image, caption, detections, loc, mean_area, pools, adapters, skips)


def run_followups(ctx: RunContext, prep: PreparedSource, mode: str
                  ) -> tuple[list[tuple[str, MetamorphicPair]], dict[str, list]]:
    cfg = ctx.config
    pairs, traces = [], {}
    for mr, pool in prep.pools.items():
        trace: list | None = [] if cfg.verbose else None
        chosen = select_assessments(pool, cfg.k, mode, selection_rng(cfg.seed, prep.stem, mr), trace)
        if trace is not None:
            traces[mr] = trace
        for j, a in enumerate(chosen):
            mp_id = f"{prep.stem}-{mr.lower()}-{j}"
            follow = a.candidate.image
            follow_caption = parse_caption(prep.adapters.sut.caption(follow), ctx.tagger)
            mp = assess_mp(mp_id, a.candidate, prep.caption, follow_caption, prep.localization, ctx.matcher,
                           cfg.t_down, cfg.t_up, follow)
            pairs.append((mr, mp))
    return pairs, traces


def _skip(stem: str, exc: Exception) -> dict[str, Any]:
    kind = "adapter" if isinstance(exc, AdapterError) else "input"
    return {"source": stem, "mr": None, "kind": kind, "error": f"{type(exc).__name__}: {exc}"}


def process_source(ctx: RunContext, path: Path, mode: str | None = None) -> SourceOutcome:
    stem = path.stem
    try:
        prep = prepare_source(ctx, path)
        pairs, traces = run_followups(ctx, prep, mode or ctx.config.selection_mode)
    except (AdapterError, InputDomainError, OSError, ValueError) as exc:
        log.warning("skipping %s: %s", stem, exc)
        return SourceOutcome(stem, skips=[_skip(stem, exc)])
    return SourceOutcome(stem, prep, pairs, traces, list(prep.skips))


# -- persistence ----------------------------------------------------------------------

def _dumps(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def mp_record(source: str, mr: str, mp: MetamorphicPair) -> dict[str, Any]:
    counts = {f.value: len(mp.objects_with(f)) for f in Fate}
    counts["unlocated"] = len(mp.localization.unlocated)
    return {
        "mp_id": mp.id,
        "source": source,
        "mr": mr,
        "spec": mp.spec.to_json(),
        "source_caption": mp.source_caption.text,
        "followup_caption": mp.followup_caption.text,
        "fates": [{"object": f.obj.key, "span": list(f.obj.span), "ratio": f.ratio, "fate": f.fate.value}
                  for f in mp.fates],
        "unlocated": [o.key for o in mp.localization.unlocated],
        "counts": counts,
        "valid": mp.is_valid,
        "violations": len(mp.violations),
        "source_image": f"images/{source}.png",
        "followup_image": f"images/{mp.id}.png",
    }


class RunWriter:
    """Single writer for a run directory; every record is one complete JSON line."""

    def __init__(self, run_dir: Path):
        self.run_dir = run_dir
        for d in RUN_DIRS:
            (run_dir / d).mkdir(parents=True, exist_ok=True)
        for name in ("mps.jsonl", "violations.jsonl", "sources.jsonl"):
            (run_dir / name).touch()

    def _append(self, name: str, records: Iterable[dict[str, Any]]) -> None:
        lines = "".join(_dumps(r) + "\n" for r in records)
        if lines:
            with (self.run_dir / name).open("a", encoding="utf-8") as fh:
                fh.write(lines)

    def write_source(self, outcome: SourceOutcome) -> None:
        prep = outcome.prepared
        if prep is not None:
            prep.image.save_png(self.run_dir / "images" / f"{prep.stem}.png")
            dump_localization(prep.localization, self.run_dir / "masks", prep.stem)
            for mr, mp in outcome.pairs:
                mp.followup_image.save_png(self.run_dir / "images" / f"{mp.id}.png")  # type: ignore[union-attr]
            if outcome.traces:
                (self.run_dir / "traces" / f"{prep.stem}.json").write_text(
                    json.dumps(outcome.traces, sort_keys=True, indent=1) + "\n", encoding="utf-8")
            self._append("mps.jsonl", (mp_record(prep.stem, mr, mp) for mr, mp in outcome.pairs))
            self._append("violations.jsonl", (v.to_json() for _, mp in outcome.pairs for v in mp.violations))
        source_rec = {"source": outcome.stem, "completed": prep is not None, "skips": outcome.skips}
        if prep is not None:
            source_rec.update({
                "caption": prep.caption.text,
                "detections": [d.to_json() for d in prep.detections],
                "localization": prep.localization.to_json(),
                "mean_od_area": prep.mean_od_area,
                "pool_sizes": {mr: len(p) for mr, p in prep.pools.items()},
            })
        self._append("sources.jsonl", [source_rec])


def read_jsonl(path: Path) -> list[dict[str, Any]]:
    if not path.exists():
        return []
    with path.open(encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def _write_jsonl(path: Path, records: Sequence[dict[str, Any]]) -> None:
    path.write_text("".join(_dumps(r) + "\n" for r in records), encoding="utf-8")


def _prepare_run_dir(run_dir: Path, resume: bool, overwrite: bool) -> set[str]:
    """Returns the sources already completed (resume) after trimming partial records."""
    existing = [run_dir / f for f in RUN_FILES if (run_dir / f).exists()]
    if existing and not (resume or overwrite):
        raise ConfigError(f"run directory {run_dir} already holds a run; pass resume or overwrite")
    if overwrite and not resume:
        for f in existing:
            f.unlink()
        for d in RUN_DIRS:
            shutil.rmtree(run_dir / d, ignore_errors=True)
        return set()
    sources = [s for s in read_jsonl(run_dir / "sources.jsonl") if s["completed"]]
    done = {s["source"] for s in sources}
    mps = [r for r in read_jsonl(run_dir / "mps.jsonl") if r["source"] in done]
    ids = {r["mp_id"] for r in mps}
    viol = [v for v in read_jsonl(run_dir / "violations.jsonl") if v["mp_id"] in ids]
    # skipped sources are retried, partially written ones rewritten from scratch
    _write_jsonl(run_dir / "sources.jsonl", sources)
    _write_jsonl(run_dir / "mps.jsonl", mps)
    _write_jsonl(run_dir / "violations.jsonl", viol)
    (run_dir / "manifest.json").unlink(missing_ok=True)
    return done


def _digest_files(run_dir: Path) -> str:
    h = hashlib.sha256()
    files = [run_dir / f for f in ("mps.jsonl", "violations.jsonl", "sources.jsonl")]
    for d in ("images", "masks", "traces"):
        files += sorted((run_dir / d).glob("*"))
    for f in files:
        if f.is_file():
            h.update(f.relative_to(run_dir).as_posix().encode("utf-8") + b"\0")
            h.update(hashlib.sha256(f.read_bytes()).digest())
    return h.hexdigest()


def write_manifest(run_dir: Path, config: RunConfig, images: Sequence[Path]) -> dict[str, Any]:
    sources = read_jsonl(run_dir / "sources.jsonl")
    mps = read_jsonl(run_dir / "mps.jsonl")
    violations = read_jsonl(run_dir / "violations.jsonl")
    order = {p.stem: i for i, p in enumerate(images)}
    sources.sort(key=lambda s: order.get(s["source"], len(order)))
    cfg = config.to_json()
    cfg.pop("output")
    cfg.pop("concurrency")
    manifest = {
        "config": cfg,
        "config_hash": config.hash(),
        "sources": [s["source"] for s in sources],
        "completed_sources": sum(1 for s in sources if s["completed"]),
        "skips": [sk for s in sources for sk in s["skips"]],
        "mps": len(mps),
        "mp_ids": [r["mp_id"] for r in mps],
        "mps_by_mr": {mr: sum(1 for r in mps if r["mr"] == mr) for mr in config.mrs},
        "violations": len(violations),
        "content_hash": _digest_files(run_dir),
    }
    (run_dir / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=1) + "\n", encoding="utf-8")
    return manifest


def manifest_hash(run_dir: str | Path) -> str:
    return hashlib.sha256((Path(run_dir) / "manifest.json").read_bytes()).hexdigest()


@dataclass
class RunSummary:
    run_dir: Path
    sources: int
    mps: int
    violations: int
    skips: list[dict[str, Any]]

    @property
    def exit_code(self) -> int:
        """0 clean, 2 when every source failed on an adapter, 3 when anything was skipped."""
        if not self.skips:
            return 0
        failed = [s for s in self.skips if s["mr"] is None]
        if failed and len(failed) == self.sources and all(s["kind"] == "adapter" for s in failed):
            return 2
        return 3


def run_pipeline(config: RunConfig, resume: bool = False, overwrite: bool = False) -> RunSummary:
    images = list_images(config.images)
    run_dir = config.output
    run_dir.mkdir(parents=True, exist_ok=True)
    done = _prepare_run_dir(run_dir, resume, overwrite)
    todo = [p for p in images if p.stem not in done]
    writer = RunWriter(run_dir)
    with RunContext(config) as ctx, ThreadPoolExecutor(config.concurrency) as pool:
        futures = [pool.submit(process_source, ctx, p) for p in todo]
        # results are written in source order regardless of completion order
        for fut in futures:
            writer.write_source(fut.result())
    manifest = write_manifest(run_dir, config, images)
    return RunSummary(run_dir, len(manifest["sources"]), manifest["mps"], manifest["violations"], manifest["skips"])
