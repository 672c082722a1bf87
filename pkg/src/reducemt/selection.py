"""Object fates under a transformation and greedy follow-up selection."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Any, Sequence

import numpy as np

from .alignment import LocalizationMap
from .caption_analysis import NounPhrase
from .errors import ConfigError, InputDomainError
from .imagery import BitMask, mask_count, mask_intersection_count, mask_union_count
from .transforms import TransformResult

T_DOWN = 0.2
T_UP = 0.9
DEFAULT_K = 3
SELECTION_MODES = ("full", "no_ambiguity", "no_diversity", "random")
TIE_EPS = 1e-12


class Fate(str, Enum):
    RETAIN = "retain"
    AMBIGUOUS = "ambiguous"
    DISAPPEAR = "disappear"


def check_thresholds(t_down: float, t_up: float) -> None:
    if not 0.0 <= t_down < t_up <= 1.0:
        raise ConfigError(f"fate thresholds need 0 <= t_down < t_up <= 1, got t_down={t_down}, t_up={t_up}")


def retain_ratio(m_loc: BitMask, m_tran: BitMask) -> float:
    """Share of the object's located pixels that survive the transformation."""
    n = mask_count(m_loc)
    if n == 0:
        raise InputDomainError("retain ratio of an empty location mask is undefined")
    return mask_intersection_count(m_loc, m_tran) / n


def classify_fate(ratio: float, t_down: float = T_DOWN, t_up: float = T_UP) -> Fate:
    check_thresholds(t_down, t_up)
    if ratio >= t_up:
        return Fate.RETAIN
    if ratio <= t_down:
        return Fate.DISAPPEAR
    return Fate.AMBIGUOUS


def ambiguity_score(n_disappear: int, n_ambiguous: int) -> int:
    return n_disappear - n_ambiguous


def mask_difference(a: BitMask, b: BitMask) -> float:
    """Jaccard distance between two masks."""
    union = mask_union_count(a, b)
    if union == 0:
        raise InputDomainError("mask difference of two empty masks is undefined")
    return 1.0 - mask_intersection_count(a, b) / union


def _mask_of(c: Any) -> BitMask:
    if isinstance(c, BitMask):
        return c
    if isinstance(c, CandidateAssessment):
        return c.candidate.m_tran
    return c.m_tran


def diversity_score(candidate: Any, selected: Sequence[Any]) -> float:
    if not selected:
        raise InputDomainError("diversity is only defined against a nonempty selected set")
    mask = _mask_of(candidate)
    return min(mask_difference(mask, _mask_of(s)) for s in selected)


@dataclass(frozen=True)
class ObjectFate:
    obj: NounPhrase
    ratio: float
    fate: Fate


@dataclass(frozen=True, eq=False)
class CandidateAssessment:
    candidate: TransformResult
    index: int
    fates: tuple[ObjectFate, ...]
    n_unlocated: int = 0

    def _count(self, fate: Fate) -> int:
        return sum(1 for f in self.fates if f.fate is fate)

    @property
    def n_retain(self) -> int:
        return self._count(Fate.RETAIN)

    @property
    def n_ambiguous(self) -> int:
        return self._count(Fate.AMBIGUOUS)

    @property
    def n_disappear(self) -> int:
        return self._count(Fate.DISAPPEAR)

    @property
    def score_ambiguity(self) -> int:
        return ambiguity_score(self.n_disappear, self.n_ambiguous)

    @property
    def is_valid(self) -> bool:
        """At least one object is cleanly retained or removed."""
        return self.n_retain + self.n_disappear > 0


def assess_candidate(candidate: TransformResult, loc: LocalizationMap, index: int = 0,
                     t_down: float = T_DOWN, t_up: float = T_UP) -> CandidateAssessment:
    check_thresholds(t_down, t_up)
    fates = []
    for entry in loc.entries:
        r = retain_ratio(entry.mask, candidate.m_tran)
        fates.append(ObjectFate(entry.obj, r, classify_fate(r, t_down, t_up)))
    return CandidateAssessment(candidate, index, tuple(fates), len(loc.unlocated))


def _minmax(values: np.ndarray) -> np.ndarray:
    lo, hi = values.min(), values.max()
    if hi - lo <= 0:
        return np.zeros_like(values, dtype=np.float64)
    return (values - lo) / (hi - lo)


def _first_max(values: np.ndarray) -> int:
    """Position of the maximum; near-equal values resolve to the earliest position."""
    return int(np.flatnonzero(values >= values.max() - TIE_EPS)[0])


def select_assessments(candidates: Sequence[CandidateAssessment], k: int = DEFAULT_K, mode: str = "full",
                       rng: np.random.Generator | None = None,
                       trace: list[dict[str, Any]] | None = None) -> list[CandidateAssessment]:
    """Greedy follow-up selection.

    The first pick maximizes the ambiguity score; every later pick maximizes the sum of
    the min-max normalized ambiguity and diversity scores over the still unselected pool.
    Ties go to the earliest generated candidate.  ``mode`` switches to the ablations:
    ``no_ambiguity`` (random first pick, diversity only afterwards), ``no_diversity``
    (ambiguity only) and ``random``.
    """
    if not candidates:
        raise InputDomainError("cannot select follow-ups from an empty candidate pool")
    if k < 1:
        raise ConfigError(f"k must be at least 1, got {k}")
    if mode not in SELECTION_MODES:
        raise ConfigError(f"unknown selection mode {mode!r}")
    pool = sorted(candidates, key=lambda c: c.index)
    if mode in ("random", "no_ambiguity") and rng is None:
        raise ConfigError(f"selection mode {mode!r} needs a random generator")
    if mode == "random":
        picks = rng.choice(len(pool), size=min(k, len(pool)), replace=False)
        chosen = [pool[int(i)] for i in picks]
        if trace is not None:
            trace.append({"mode": mode, "picked": [c.index for c in chosen]})
        return chosen

    flat = np.stack([c.candidate.m_tran.bits.ravel() for c in pool])
    sizes = flat.sum(axis=1).astype(np.int64)
    amb = np.array([c.score_ambiguity for c in pool], dtype=np.float64)
    remaining = list(range(len(pool)))
    min_div = np.full(len(pool), np.inf)
    chosen_idx: list[int] = []
    while remaining and len(chosen_idx) < k:
        rem = np.array(remaining)
        if not chosen_idx:
            if mode == "no_ambiguity":
                pos = int(rng.integers(len(rem)))
            else:
                pos = _first_max(amb[rem])
            total = amb[rem]
            div_view = None
        else:
            div_view = min_div[rem]
            if mode == "no_diversity":
                total = amb[rem]
            elif mode == "no_ambiguity":
                total = _minmax(div_view)
            else:
                total = _minmax(amb[rem]) + _minmax(div_view)
            pos = _first_max(total)
        pick = int(rem[pos])
        if trace is not None:
            trace.append({
                "iteration": len(chosen_idx),
                "picked": pool[pick].index,
                "scores": [
                    {"index": pool[int(i)].index, "ambiguity": int(amb[i]),
                     "diversity": None if div_view is None else float(div_view[j]), "total": float(total[j])}
                    for j, i in enumerate(rem)
                ],
            })
        chosen_idx.append(pick)
        remaining.remove(pick)
        inter = (flat & flat[pick]).sum(axis=1)
        union = sizes + sizes[pick] - inter
        with np.errstate(invalid="ignore", divide="ignore"):
            diff = np.where(union > 0, 1.0 - inter / np.where(union > 0, union, 1), np.nan)
        if np.isnan(diff[remaining]).any():
            raise InputDomainError("two empty transformation masks cannot be compared")
        min_div = np.minimum(min_div, np.nan_to_num(diff, nan=np.inf))
    return [pool[i] for i in chosen_idx]


def select_followups(candidates: Sequence[CandidateAssessment], k: int = DEFAULT_K, mode: str = "full",
                     rng: np.random.Generator | None = None,
                     trace: list[dict[str, Any]] | None = None) -> list[TransformResult]:
    return [a.candidate for a in select_assessments(candidates, k, mode, rng, trace)]
