"""Acceptance suite: one test per criterion, each reporting a PASS/FAIL line."""

import time
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from reducemt.adapters.simulator import is_source_frame, load_sidecar, visible_labels
from reducemt.alignment import build_localization_map, parse_caption
from reducemt.harness import RunConfig, compare_selection_modes, compute_metrics, make_corpus, manifest_hash, run_pipeline
from reducemt.harness.pipeline import RunContext, read_jsonl
from reducemt.imagery import BitMask, Raster
from reducemt.selection import (
    Fate,
    ObjectFate,
    CandidateAssessment,
    classify_fate,
    mask_difference,
    retain_ratio,
    select_followups,
)
from reducemt.caption_analysis import NounPhrase
from reducemt.transforms import TransformResult, TransformSpec, generate_candidates

pytestmark = pytest.mark.acceptance


@pytest.fixture(scope="module")
def corpora(tmp_path_factory):
    root = tmp_path_factory.mktemp("acceptance")
    cache: dict[tuple, Path] = {}

    def get(n, seed, faults, relabel_rate=0.0):
        key = (n, seed, faults, relabel_rate)
        if key not in cache:
            out = root / f"{faults}_{seed}_{n}_{relabel_rate}"
            make_corpus(out, n, seed=seed, faults=faults, relabel_rate=relabel_rate)
            cache[key] = out
        return cache[key]

    return get


def test_fate_thresholds(verdict):
    t0 = time.perf_counter()
    bad = []
    named = {0.9: Fate.RETAIN, 0.2: Fate.DISAPPEAR, 0.5: Fate.AMBIGUOUS, 1.0: Fate.RETAIN, 0.0: Fate.DISAPPEAR}
    for r, want in named.items():
        if classify_fate(r) is not want:
            bad.append(r)
    for r in np.linspace(0.0, 1.0, 10001):
        want = Fate.RETAIN if r >= 0.9 else Fate.DISAPPEAR if r <= 0.2 else Fate.AMBIGUOUS
        if classify_fate(float(r)) is not want:
            bad.append(float(r))
    edges = [(np.nextafter(0.9, 0), Fate.AMBIGUOUS), (np.nextafter(0.2, 1), Fate.AMBIGUOUS)]
    bad += [float(r) for r, want in edges if classify_fate(float(r)) is not want]
    elapsed = time.perf_counter() - t0
    verdict(not bad and elapsed < 1, f"{len(bad)} misclassified ratios, {elapsed:.2f}s")


def _brute_ratio(loc, tran):
    inside = kept = 0
    for y in range(len(loc)):
        for x in range(len(loc[0])):
            if loc[y][x]:
                inside += 1
                kept += tran[y][x]
    return Fraction(kept, inside)


def _brute_difference(a, b):
    inter = union = 0
    for y in range(len(a)):
        for x in range(len(a[0])):
            inter += a[y][x] and b[y][x]
            union += a[y][x] or b[y][x]
    return 1 - Fraction(inter, union)


def test_ratio_and_difference_oracle(verdict):
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(1000):
        h, w = (int(v) for v in rng.integers(1, 33, size=2))
        a = rng.random((h, w)) < rng.uniform(0.05, 0.95)
        b = rng.random((h, w)) < rng.uniform(0.05, 0.95)
        a.flat[int(rng.integers(a.size))] = True
        la, lb = a.tolist(), b.tolist()
        worst = max(worst,
                    abs(retain_ratio(BitMask(a), BitMask(b)) - float(_brute_ratio(la, lb))),
                    abs(mask_difference(BitMask(a), BitMask(b)) - float(_brute_difference(la, lb))))
    elapsed = time.perf_counter() - t0
    verdict(worst <= 1e-12 and elapsed < 5, f"max deviation {worst:.3g} over 1000 pairs, {elapsed:.2f}s")


def _exhaustive_greedy(pool, k):
    """Every round, score every unpicked candidate from scratch in exact arithmetic."""
    masks = [c.candidate.m_tran.bits.tolist() for c in pool]
    amb = [Fraction(c.n_disappear - c.n_ambiguous) for c in pool]
    picked: list[int] = []
    while len(picked) < min(k, len(pool)):
        rest = [i for i in range(len(pool)) if i not in picked]
        if not picked:
            score = {i: amb[i] for i in rest}
        else:
            div = {i: min(_brute_difference(masks[i], masks[j]) for j in picked) for i in rest}
            a_lo, a_hi = min(amb[i] for i in rest), max(amb[i] for i in rest)
            d_lo, d_hi = min(div.values()), max(div.values())
            score = {i: ((amb[i] - a_lo) / (a_hi - a_lo) if a_hi > a_lo else 0)
                     + ((div[i] - d_lo) / (d_hi - d_lo) if d_hi > d_lo else 0) for i in rest}
        top = max(score.values())
        picked.append(min((pool[i].index, i) for i in rest if score[i] == top)[1])
    return [pool[i].index for i in picked]


def _random_pool(rng, size):
    h, w = int(rng.integers(2, 7)), int(rng.integers(2, 7))
    pool = []
    for index in rng.permutation(size):
        bits = rng.random((h, w)) < rng.uniform(0.2, 0.9)
        bits.flat[int(rng.integers(bits.size))] = True
        n_d, n_a = int(rng.integers(0, 4)), int(rng.integers(0, 3))
        fates = [ObjectFate(NounPhrase(f"d{i}", f"d{i}", (i, i + 1)), 0.0, Fate.DISAPPEAR) for i in range(n_d)]
        fates += [ObjectFate(NounPhrase(f"a{i}", f"a{i}", (10 + i, 11 + i)), 0.5, Fate.AMBIGUOUS)
                  for i in range(n_a)]
        cand = TransformResult(TransformSpec.rotate(1), BitMask(bits), None)
        pool.append(CandidateAssessment(cand, int(index), tuple(fates)))
    return pool


def test_selection_matches_exhaustive_greedy(verdict):
    rng = np.random.default_rng(77)
    t0 = time.perf_counter()
    agree = 0
    for _ in range(500):
        pool = _random_pool(rng, int(rng.integers(1, 9)))
        k = int(rng.integers(1, 5))
        chosen = select_followups(pool, k)
        got = [next(c.index for c in pool if c.candidate is r) for r in chosen]
        agree += got == _exhaustive_greedy(pool, k)
    elapsed = time.perf_counter() - t0
    verdict(agree == 500 and elapsed < 10, f"{agree}/500 trials agree, {elapsed:.2f}s")


def test_zero_false_positives(corpora, tmp_path, verdict):
    t0 = time.perf_counter()
    summary = run_pipeline(RunConfig(images=corpora(100, 1, "none"), output=tmp_path / "run"))
    elapsed = time.perf_counter() - t0
    ok = summary.violations == 0 and summary.mps == 900 and elapsed < 120
    verdict(ok, f"{summary.violations} violations over {summary.mps} pairs, {elapsed:.1f}s")


def _fault_rates(corpus: Path, run_dir: Path, plan: str) -> tuple[int, int]:
    """(applicable scenes, scenes where the expected violation fired)."""
    mps = read_jsonl(run_dir / "mps.jsonl")
    by_mp: dict[str, list] = {}
    for v in read_jsonl(run_dir / "violations.jsonl"):
        by_mp.setdefault(v["mp_id"], []).append(v)
    applicable = hits = 0
    for src in sorted({r["source"] for r in mps}):
        scene, fault, _ = load_sidecar(corpus / f"{src}.png")
        reference = scene.render()
        seen = found = False
        for r in (r for r in mps if r["source"] == src):
            follow = Raster.from_png(run_dir / r["followup_image"])
            if is_source_frame(scene, follow, reference):
                continue
            fates = {f["object"]: f["fate"] for f in r["fates"]}
            viols = by_mp.get(r["mp_id"], [])
            if plan == "fabricate":
                if fates.get(fault.target) != "disappear" or fault.label not in visible_labels(scene, follow, 0.5):
                    continue
                seen = True
                found |= any(v["rule"] == "R2" and v["hint"] == "Type3" and v["object"] == fault.target
                             for v in viols)
            else:
                if fates.get(fault.label) != "retain":
                    continue
                seen = True
                found |= any(v["rule"] == "R1" and v["object"] == fault.label
                             and (plan == "omit" or v["hint"] == "Type1.2") for v in viols)
        applicable += seen
        hits += seen and found
    return applicable, hits


@pytest.mark.slow
def test_fault_detection(corpora, tmp_path, verdict):
    t0 = time.perf_counter()
    rates, lines = {}, []
    for plan, need in (("omit", 0.95), ("fabricate", 0.95), ("misclassify", 0.90)):
        corpus = corpora(100, 7, plan)
        run_pipeline(RunConfig(images=corpus, output=tmp_path / plan))
        applicable, hits = _fault_rates(corpus, tmp_path / plan, plan)
        rates[plan] = (applicable > 0 and hits / applicable >= need)
        lines.append(f"{plan} {hits}/{applicable}")
    elapsed = time.perf_counter() - t0
    verdict(all(rates.values()) and elapsed < 300, f"{', '.join(lines)}, {elapsed:.1f}s")


def test_localization_quality(corpora, tmp_path, verdict):
    t0 = time.perf_counter()
    corpus = corpora(50, 13, "none", relabel_rate=0.5)
    cfg = RunConfig(images=corpus, output=tmp_path / "unused")
    located = occluded = 0
    failures = []
    with RunContext(cfg) as ctx:
        for path in sorted(corpus.glob("*.png")):
            scene, _, _ = load_sidecar(path)
            boxes = {o.label: o.box for o in scene.objects}
            image = Raster.from_png(path)
            adapters = ctx.adapters_for(path)
            caption = parse_caption(adapters.sut.caption(image), ctx.tagger)
            loc = build_localization_map(caption, image, adapters.od.detect(image), adapters.sut,
                                         adapters.inpaint, ctx.matcher, ctx.tagger, cfg.od_score)
            failures += [f"{path.stem}:{o.lemma} unlocated" for o in loc.unlocated]
            for e in loc.entries:
                truth = np.zeros(e.mask.shape, dtype=bool)
                truth[boxes[e.obj.lemma].slices()] = True
                iou = (e.mask.bits & truth).sum() / (e.mask.bits | truth).sum()
                located += 1
                occluded += e.source == "occlusion"
                if iou < 0.5:
                    failures.append(f"{path.stem}:{e.obj.lemma} IoU {iou:.2f}")
    elapsed = time.perf_counter() - t0
    ok = not failures and occluded > 0 and elapsed < 120
    verdict(ok, f"{located} objects located ({occluded} by occlusion), {len(failures)} failures "
                f"{failures[:3]}, {elapsed:.1f}s")


@pytest.mark.slow
def test_selection_strategy_direction(corpora, tmp_path, verdict):
    t0 = time.perf_counter()
    res = compare_selection_modes(RunConfig(images=corpora(100, 11, "mixed"), output=tmp_path / "x", seed=0),
                                  ("full", "no_ambiguity", "no_diversity"))
    m = res["modes"]
    elapsed = time.perf_counter() - t0
    ok = (m["full"]["valid_cases"] > m["no_ambiguity"]["valid_cases"]
          and m["full"]["distinct_objects"] >= m["no_diversity"]["distinct_objects"] and elapsed < 600)
    verdict(ok, f"valid cases full {m['full']['valid_cases']} vs no_ambiguity {m['no_ambiguity']['valid_cases']}; "
                f"distinct objects full {m['full']['distinct_objects']} vs no_diversity "
                f"{m['no_diversity']['distinct_objects']}, {elapsed:.1f}s")


def test_rotation_pool(verdict):
    t0 = time.perf_counter()
    pool = generate_candidates(Raster.filled(24, 24, (10, 20, 30)), 50.0, "rotate")
    angles = sorted(c.spec.angle for c in pool)
    expected = [a for a in range(-30, 31) if a != 0]
    elapsed = time.perf_counter() - t0
    verdict(len(pool) == 60 and angles == expected and elapsed < 1, f"{len(pool)} specs, {elapsed:.2f}s")


def test_metrics_arithmetic(metrics_fixture, verdict):
    run, labels = metrics_fixture
    rep = compute_metrics(run, labels, "object")
    ok = ((rep.tp, rep.fn, rep.fp, rep.tn) == (2, 1, 1, 6) and rep.precision == 2 / 3 and rep.recall == 2 / 3
          and rep.accuracy == 0.8)
    verdict(ok, f"precision {rep.precision}, recall {rep.recall}, accuracy {rep.accuracy}")


@pytest.mark.slow
def test_determinism(corpora, tmp_path, verdict):
    t0 = time.perf_counter()
    corpus = corpora(30, 21, "mixed", relabel_rate=0.3)
    hashes = [manifest_hash(run_pipeline(RunConfig(images=corpus, output=tmp_path / d, seed=5,
                                                   concurrency=c)).run_dir)
              for d, c in (("a", 4), ("b", 2))]
    elapsed = time.perf_counter() - t0
    verdict(hashes[0] == hashes[1] and elapsed < 300, f"{hashes[0][:12]} vs {hashes[1][:12]}, {elapsed:.1f}s")
