"""Captions, extracted noun phrases and semantic membership."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Sequence

from ..errors import InputDomainError
from .lexicon import is_noun
from .matcher import SemanticMatcher

_WS = re.compile(r"\s+")


@dataclass(frozen=True)
class Token:
    surface: str
    pos: str
    lemma: str


@dataclass(frozen=True)
class Caption:
    text: str
    tokens: tuple[Token, ...]

    def __post_init__(self) -> None:
        joined = "".join(t.surface for t in self.tokens)
        if _WS.sub("", joined) != _WS.sub("", self.text):
            raise InputDomainError(f"tokens do not cover caption text {self.text!r}")

    @classmethod
    def from_tagged(cls, text: str, tagged: Iterable[Sequence[str]]) -> "Caption":
        return cls(text, tuple(Token(s, p, l) for s, p, l in tagged))


@dataclass(frozen=True)
class NounPhrase:
    """One caption object: a maximal run of contiguous nouns, headed by the last noun.

    ``span`` is the half-open token index range; ``lemma`` the lowercase singular head
    and ``phrase_lemma`` the lemmatized phrase.
    """

    surface: str
    lemma: str
    span: tuple[int, int]
    phrase_lemma: str = ""

    def __post_init__(self) -> None:
        if not self.lemma:
            raise InputDomainError("noun phrase lemma must be nonempty")
        if self.span[0] >= self.span[1] or self.span[0] < 0:
            raise InputDomainError(f"bad noun phrase span {self.span}")
        if not self.phrase_lemma:
            object.__setattr__(self, "phrase_lemma", self.lemma)

    @property
    def key(self) -> str:
        """Stable identifier used in run records."""
        return self.phrase_lemma


def extract_objects(caption: Caption) -> list[NounPhrase]:
    """Group nouns into contiguous runs, dropping any run directly followed by "of"."""
    tokens = caption.tokens
    out: list[NounPhrase] = []
    i = 0
    while i < len(tokens):
        if not is_noun(tokens[i].pos):
            i += 1
            continue
        j = i
        while j < len(tokens) and is_noun(tokens[j].pos):
            j += 1
        followed_by_of = j < len(tokens) and tokens[j].surface.lower() == "of"
        if not followed_by_of:
            run = tokens[i:j]
            lemmas = [t.lemma.lower() for t in run]
            out.append(NounPhrase(
                surface=" ".join(t.surface for t in run),
                lemma=lemmas[-1],
                span=(i, j),
                phrase_lemma=" ".join(lemmas),
            ))
        i = j
    return out


def contains_object(objects: Sequence[NounPhrase], target: NounPhrase, m: SemanticMatcher) -> bool:
    """Semantic membership: phrase equality first, then head-lemma category match."""
    for obj in objects:
        if obj.phrase_lemma == target.phrase_lemma:
            return True
        if m.same_category(obj.lemma, target.lemma):
            return True
    return False


def find_match(objects: Sequence[NounPhrase], target: NounPhrase, m: SemanticMatcher) -> NounPhrase | None:
    for obj in objects:
        if obj.phrase_lemma == target.phrase_lemma or m.same_category(obj.lemma, target.lemma):
            return obj
    return None
