import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from reducemt.adapters import FaultSpec, SceneObject, SimulatedCaptioner, SimulatedDetector, SyntheticScene
from reducemt.adapters.simulator import PALETTE
from reducemt.alignment import LocalizationEntry, LocalizationMap, build_localization_map, parse_caption
from reducemt.caption_analysis import SemanticMatcher, extract_objects
from reducemt.imagery import BBox, Raster, mask_from_boxes
from reducemt.oracle import (
    Violation,
    assess_mp,
    check_rule1,
    check_rule2,
    check_rule3,
    make_pair,
    rule3_applies,
)
from reducemt.selection import Fate
from reducemt.transforms import apply_crop, generate_candidates


@pytest.fixture(scope="module")
def matcher():
    return SemanticMatcher.load()


def located(caption, boxes, size=(100, 100)):
    objs = extract_objects(caption)
    entries = []
    unlocated = []
    for o in objs:
        box = boxes.get(o.lemma)
        if box is None:
            unlocated.append(o)
        else:
            entries.append(LocalizationEntry(o, mask_from_boxes([box], *size), "od", (box,)))
    return LocalizationMap(tuple(objs), tuple(entries), tuple(unlocated))


def pair(src_text, follow_text, boxes, crop=((0, 0), (100, 100)), m=None):
    src = parse_caption(src_text)
    cand = apply_crop(Raster.filled(100, 100, (0, 0, 0)), *crop)
    return make_pair("mp1", cand, src, parse_caption(follow_text), located(src, boxes))


HOOP = {"man": BBox(10, 10, 30, 60), "hoop": BBox(40, 5, 60, 20), "ball": BBox(70, 70, 90, 90)}
LEFT = ((0, 0), (65, 100))


class TestRule1:
    def test_retained_missing(self, matcher):
        mp = pair("a man throwing a ball at a hoop", "a man standing", HOOP, LEFT)
        assert [v.object for v in check_rule1(mp, matcher)] == ["hoop"]

    def test_retained_present(self, matcher):
        mp = pair("a man and a hoop", "a person near a hoop", HOOP, LEFT)
        assert check_rule1(mp, matcher) == []

    def test_nothing_retained(self, matcher):
        mp = pair("a ball", "nothing", HOOP, LEFT)
        assert mp.s_retain == [] and check_rule1(mp, matcher) == []


class TestRule2:
    def test_disappeared_still_described(self, matcher):
        mp = pair("a man and a ball", "a man with a ball", HOOP, LEFT)
        assert [(v.rule, v.object, v.hint) for v in check_rule2(mp, matcher)] == [("R2", "ball", "Type3")]

    def test_disappeared_absent(self, matcher):
        mp = pair("a man and a ball", "a man", HOOP, LEFT)
        assert check_rule2(mp, matcher) == []

    def test_nothing_disappeared(self, matcher):
        mp = pair("a man and a hoop", "a man", HOOP, LEFT)
        assert check_rule2(mp, matcher) == []


class TestRule3:
    def test_followup_adds_chair(self, matcher):
        mp = pair("a man and a hoop", "a man and a hoop and a chair", HOOP)
        assert rule3_applies(mp)
        assert [(v.object, v.side, v.hint) for v in check_rule3(mp, matcher)] == [("chair", "source", "Type2.1")]

    def test_skipped_when_something_disappears(self, matcher):
        mp = pair("a man and a ball", "a man and a chair", HOOP, LEFT)
        assert not rule3_applies(mp) and check_rule3(mp, matcher) == []

    def test_identical_sets(self, matcher):
        mp = pair("a man and a hoop", "a hoop and a man", HOOP)
        assert check_rule3(mp, matcher) == []

    def test_plural_mismatch_is_not_a_violation(self, matcher):
        mp = pair("a man and a hoop", "a man and two hoops", HOOP)
        assert check_rule3(mp, matcher) == []

    def test_unlocated_disables(self, matcher):
        mp = pair("a man and a dog", "a man and a chair", {"man": HOOP["man"]})
        assert not rule3_applies(mp)


class TestAssessMp:
    def test_dedupes_r1_and_r3(self, matcher):
        src = parse_caption("a man and a hoop")
        cand = apply_crop(Raster.filled(100, 100, (0, 0, 0)), (0, 0), (100, 100))
        mp = assess_mp("mp1", cand, src, parse_caption("a man"), located(src, HOOP), matcher)
        assert [(v.rule, v.object) for v in mp.violations] == [("R1", "hoop")]

    def test_misclassification_hint(self, matcher):
        src = parse_caption("a man and a hoop")
        cand = apply_crop(Raster.filled(100, 100, (0, 0, 0)), (0, 0), (100, 100))
        mp = assess_mp("mp1", cand, src, parse_caption("a man and a kite"), located(src, HOOP), matcher)
        assert [(v.rule, v.object, v.hint) for v in mp.violations] == [("R1", "hoop", "Type1.2")]

    def test_no_violation_references_ambiguous(self, matcher):
        boxes = {"man": BBox(0, 0, 20, 20), "hoop": BBox(40, 40, 80, 80)}
        src = parse_caption("a man and a hoop")
        cand = apply_crop(Raster.filled(100, 100, (0, 0, 0)), (0, 0), (60, 100))
        mp = assess_mp("mp1", cand, src, parse_caption("a cat"), located(src, boxes), matcher)
        assert [f.fate for f in mp.fates] == [Fate.RETAIN, Fate.AMBIGUOUS]
        assert {v.object for v in mp.violations} == {"man"}

    def test_json_round_trip(self):
        v = Violation("s1-mr1-0", "R2", "vase", "followup", "Type3")
        assert Violation.from_json(v.to_json()) == v
        assert set(v.to_json()) == {"mp_id", "rule", "object", "side", "hint"}


def simulated_pairs(scene, fault, matcher, kind="crop"):
    src = scene.render()
    faithful = SimulatedCaptioner(scene)
    sut = SimulatedCaptioner(scene, fault)
    cap = parse_caption(sut.caption(src))
    loc = build_localization_map(cap, src, SimulatedDetector(scene), faithful, None, matcher)
    for i, cand in enumerate(generate_candidates(src, 300, kind, seed=0)):
        yield assess_mp(f"mp{i}", cand, cap, parse_caption(sut.caption(cand.image)), loc, matcher,
                        followup_image=cand.image)


@pytest.fixture
def ball_box_vase():
    return SyntheticScene(96, 60, (
        SceneObject("ball", BBox(4, 10, 28, 34), PALETTE["ball"]),
        SceneObject("box", BBox(36, 20, 58, 44), PALETTE["box"]),
        SceneObject("vase", BBox(68, 8, 90, 40), PALETTE["vase"]),
    ))


class TestEndToEnd:
    def test_faithful_captions_never_violate(self, matcher, ball_box_vase):
        for kind in ("crop", "stretch", "rotate"):
            assert all(not mp.violations for mp in simulated_pairs(ball_box_vase, FaultSpec(), matcher, kind))

    def test_omit_retained_object(self, matcher, ball_box_vase):
        for mp in simulated_pairs(ball_box_vase, FaultSpec.omit("box"), matcher):
            identical = mp.followup_image == mp.source_image
            expected = [("R1", "box")] if "box" in {o.key for o in mp.s_retain} and not identical else []
            assert [(v.rule, v.object) for v in mp.violations] == expected

    def test_fabricate_cropped_out_object(self, matcher, ball_box_vase):
        hits = 0
        for mp in simulated_pairs(ball_box_vase, FaultSpec.fabricate("ball", "vase"), matcher):
            if "ball" in {o.key for o in mp.s_retain} and "vase" in {o.key for o in mp.s_disappear}:
                hits += 1
                assert [(v.rule, v.object, v.hint) for v in mp.violations] == [("R2", "vase", "Type3")]
        assert hits > 0

    def test_rechecking_is_pure(self, matcher, ball_box_vase):
        from reducemt.oracle import evaluate_rules
        for mp in simulated_pairs(ball_box_vase, FaultSpec.omit("ball"), matcher, "rotate"):
            assert evaluate_rules(mp, matcher).violations == mp.violations
