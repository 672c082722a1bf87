"""Output relations between a source caption and a follow-up caption.

Rule 1: an object that is retained must still be described.
Rule 2: an object that disappeared must no longer be described.
Rule 3: when nothing was removed or cut, both captions must name the same objects.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Sequence

from .alignment import LocalizationMap
from .caption_analysis import Caption, NounPhrase, SemanticMatcher, contains_object, extract_objects
from .imagery import Raster
from .selection import T_DOWN, T_UP, Fate, ObjectFate, assess_candidate
from .transforms import TransformResult, TransformSpec

RULES = ("R1", "R2", "R3")
HINTS = ("Type1.1", "Type1.2", "Type2.1", "Type2.2", "Type3", "Unknown")
SIDE_SOURCE = "source"
SIDE_FOLLOWUP = "followup"


@dataclass(frozen=True)
class Violation:
    mp_id: str
    rule: str
    object: str
    side: str
    hint: str = "Unknown"

    def __post_init__(self) -> None:
        if self.rule not in RULES:
            raise ValueError(f"unknown rule {self.rule!r}")
        if self.hint not in HINTS:
            raise ValueError(f"unknown hint {self.hint!r}")

    def to_json(self) -> dict[str, str]:
        return {"mp_id": self.mp_id, "rule": self.rule, "object": self.object, "side": self.side, "hint": self.hint}

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "Violation":
        return cls(data["mp_id"], data["rule"], data["object"], data["side"], data.get("hint", "Unknown"))


@dataclass(frozen=True)
class MetamorphicPair:
    id: str
    spec: TransformSpec
    source_caption: Caption
    followup_caption: Caption
    localization: LocalizationMap
    fates: tuple[ObjectFate, ...]
    violations: tuple[Violation, ...] = ()
    source_image: Raster | None = field(default=None, repr=False, compare=False)
    followup_image: Raster | None = field(default=None, repr=False, compare=False)

    def objects_with(self, fate: Fate) -> list[NounPhrase]:
        return [f.obj for f in self.fates if f.fate is fate]

    @property
    def s_retain(self) -> list[NounPhrase]:
        return self.objects_with(Fate.RETAIN)

    @property
    def s_ambiguous(self) -> list[NounPhrase]:
        return self.objects_with(Fate.AMBIGUOUS)

    @property
    def s_disappear(self) -> list[NounPhrase]:
        return self.objects_with(Fate.DISAPPEAR)

    @property
    def source_objects(self) -> list[NounPhrase]:
        return extract_objects(self.source_caption)

    @property
    def followup_objects(self) -> list[NounPhrase]:
        return extract_objects(self.followup_caption)

    @property
    def is_valid(self) -> bool:
        return bool(self.s_retain or self.s_disappear)

    @property
    def violated(self) -> bool:
        return bool(self.violations)


def _unmatched(objects: Sequence[NounPhrase], others: Sequence[NounPhrase], m: SemanticMatcher) -> list[NounPhrase]:
    out, seen = [], set()
    for o in objects:
        if o.key in seen:
            continue
        seen.add(o.key)
        if not contains_object(others, o, m):
            out.append(o)
    return out


def check_rule1(mp: MetamorphicPair, m: SemanticMatcher) -> list[Violation]:
    follow = mp.followup_objects
    return [Violation(mp.id, "R1", o.key, SIDE_FOLLOWUP, "Type2.2")
            for o in mp.s_retain if not contains_object(follow, o, m)]


def check_rule2(mp: MetamorphicPair, m: SemanticMatcher) -> list[Violation]:
    follow = mp.followup_objects
    return [Violation(mp.id, "R2", o.key, SIDE_FOLLOWUP, "Type3")
            for o in mp.s_disappear if contains_object(follow, o, m)]


def rule3_applies(mp: MetamorphicPair) -> bool:
    return not mp.s_ambiguous and not mp.s_disappear and not mp.localization.unlocated


def check_rule3(mp: MetamorphicPair, m: SemanticMatcher) -> list[Violation]:
    """Set equivalence of the two captions' objects, only for pairs where nothing was cut."""
    if not rule3_applies(mp):
        return []
    src, follow = mp.source_objects, mp.followup_objects
    out = [Violation(mp.id, "R3", o.key, SIDE_SOURCE, "Type2.1") for o in _unmatched(follow, src, m)]
    out += [Violation(mp.id, "R3", o.key, SIDE_FOLLOWUP, "Unknown") for o in _unmatched(src, follow, m)]
    return out


def _with_hints(mp: MetamorphicPair, r1: list[Violation], r3: list[Violation], m: SemanticMatcher
                ) -> tuple[list[Violation], list[Violation]]:
    """Upgrade Rule 1 hints to Type1.2 when the follow-up names something new, and drop
    Rule 3 findings that repeat a Rule 1 finding or its renamed counterpart."""
    novel = _unmatched(mp.followup_objects, mp.source_objects, m)
    claimed: set[str] = set()
    hinted = []
    for v in r1:
        if novel:
            counterpart = novel[min(len(claimed), len(novel) - 1)]
            claimed.add(counterpart.key)
            hinted.append(Violation(v.mp_id, v.rule, v.object, v.side, "Type1.2"))
        else:
            hinted.append(v)
    flagged = {v.object for v in r1}
    kept = [v for v in r3 if not (v.side == SIDE_FOLLOWUP and v.object in flagged)
            and not (v.side == SIDE_SOURCE and v.object in claimed)]
    return hinted, kept


def make_pair(mp_id: str, candidate: TransformResult, source_caption: Caption, followup_caption: Caption,
              loc: LocalizationMap, t_down: float = T_DOWN, t_up: float = T_UP,
              followup_image: Raster | None = None) -> MetamorphicPair:
    fates = assess_candidate(candidate, loc, 0, t_down, t_up).fates
    return MetamorphicPair(mp_id, candidate.spec, source_caption, followup_caption, loc, fates,
                           source_image=candidate.source, followup_image=followup_image)


def evaluate_rules(mp: MetamorphicPair, m: SemanticMatcher) -> MetamorphicPair:
    r1, r2, r3 = check_rule1(mp, m), check_rule2(mp, m), check_rule3(mp, m)
    r1, r3 = _with_hints(mp, r1, r3, m)
    return MetamorphicPair(mp.id, mp.spec, mp.source_caption, mp.followup_caption, mp.localization, mp.fates,
                           tuple(r1 + r2 + r3), mp.source_image, mp.followup_image)


def assess_mp(mp_id: str, candidate: TransformResult, source_caption: Caption, followup_caption: Caption,
              loc: LocalizationMap, m: SemanticMatcher, t_down: float = T_DOWN, t_up: float = T_UP,
              followup_image: Raster | None = None) -> MetamorphicPair:
    """Fates for every located source object, then Rules 1-3 with hints attached."""
    pair = make_pair(mp_id, candidate, source_caption, followup_caption, loc, t_down, t_up, followup_image)
    return evaluate_rules(pair, m)
