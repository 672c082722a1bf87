"""Tokenization, lemmatization and the bundled fallback POS tagger."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

NOUN_TAGS = frozenset({"NOUN", "PROPN", "NN", "NNS", "NNP", "NNPS"})

_TOKEN_RE = re.compile(r"[A-Za-z]+(?:[-'][A-Za-z]+)*|\d+(?:\.\d+)?|[^\sA-Za-z\d]")
_PROTECTED_ENDINGS = ("ss", "us", "is")


def data_path(name: str) -> Path:
    """Location of a bundled data file."""
    return Path(str(resources.files("reducemt.caption_analysis") / "data" / name))


def _read_rows(path: str | Path) -> list[list[str]]:
    rows = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        rows.append(line.split("\t") if "\t" in line else line.split())
    return rows


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text)


def is_noun(pos: str) -> bool:
    return pos.upper() in NOUN_TAGS


@dataclass(frozen=True)
class Lemmatizer:
    """Lowercase + irregular-plural table + suffix rules.

    Suffix rules: ``-ies -> -y``; ``-es`` is stripped after s/x/z/ch/sh; otherwise a
    trailing ``-s`` is stripped unless the word is listed as an exception, is three
    letters or shorter, or ends in ss/us/is.  Irregular singulars are fixed points, which
    keeps the mapping idempotent.
    """

    irregular: dict[str, str] = field(default_factory=dict)
    exceptions: frozenset[str] = frozenset()

    @classmethod
    def load(cls, plurals: str | Path | None = None, exceptions: str | Path | None = None) -> "Lemmatizer":
        plurals = plurals or data_path("irregular_plurals.tsv")
        exceptions = exceptions or data_path("plural_exceptions.txt")
        table = {row[0].lower(): row[1].lower() for row in _read_rows(plurals)}
        excl = frozenset(row[0].lower() for row in _read_rows(exceptions))
        return cls(table, excl)

    def __call__(self, word: str) -> str:
        w = word.lower()
        if w in self.irregular:
            return self.irregular[w]
        if w in self.exceptions or w in self._fixed_points or len(w) <= 3 or not w.endswith("s"):
            return w
        if w.endswith(_PROTECTED_ENDINGS):
            return w
        if w.endswith("ies"):
            return w[:-3] + "y"
        if w.endswith(("sses", "xes", "zes", "ches", "shes")):
            return w[:-2]
        return w[:-1]

    @property
    def _fixed_points(self) -> frozenset[str]:
        return frozenset(self.irregular.values())


@dataclass(frozen=True)
class LexiconTagger:
    """Closed-class lexicon tagger; any word missing from the lexicon is a NOUN."""

    lexicon: dict[str, str]
    lemmatizer: Lemmatizer

    @classmethod
    def load(cls, lexicon: str | Path | None = None, lemmatizer: Lemmatizer | None = None) -> "LexiconTagger":
        rows = _read_rows(lexicon or data_path("lexicon.tsv"))
        return cls({row[0].lower(): row[1].upper() for row in rows}, lemmatizer or Lemmatizer.load())

    def tag(self, text: str) -> list[tuple[str, str, str]]:
        out = []
        for tok in tokenize(text):
            low = tok.lower()
            if not any(ch.isalnum() for ch in tok):
                out.append((tok, "PUNCT", tok))
            elif tok[0].isdigit():
                out.append((tok, "NUM", tok))
            elif low in self.lexicon:
                out.append((tok, self.lexicon[low], low))
            else:
                out.append((tok, "NOUN", self.lemmatizer(low)))
        return out
