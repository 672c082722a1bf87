"""Same-category decisions between words: vector similarity plus hyponymy."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Mapping

import numpy as np

from ..errors import ConfigError
from .lexicon import _read_rows, data_path

DEFAULT_COSINE_THRESHOLD = 0.55


def load_vectors(path: str | Path) -> dict[str, np.ndarray]:
    """Read a text embedding file ("word v1 ... vd" per line, optional "count dim" header).

    Vectors are L2-normalized; zero vectors are rejected.
    """
    vectors: dict[str, np.ndarray] = {}
    dim = None
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh):
            parts = line.rstrip("\n").split(" ")
            if not parts or parts == [""]:
                continue
            if lineno == 0 and len(parts) == 2 and all(p.isdigit() for p in parts):
                continue
            word, values = parts[0].lower(), np.asarray(parts[1:], dtype=np.float64)
            if dim is None:
                dim = values.size
            elif values.size != dim:
                raise ConfigError(f"{path}:{lineno + 1}: expected {dim} components, got {values.size}")
            norm = np.linalg.norm(values)
            if norm == 0:
                raise ConfigError(f"{path}:{lineno + 1}: zero vector for {word!r}")
            vectors[word] = values / norm
    return vectors


def hypernym_closure(edges: Mapping[str, set[str]]) -> dict[str, frozenset[str]]:
    """Transitive closure of hyponym -> hypernym edges; cycles raise ConfigError."""
    closed: dict[str, frozenset[str]] = {}
    visiting: set[str] = set()

    def visit(node: str, trail: list[str]) -> frozenset[str]:
        if node in closed:
            return closed[node]
        if node in visiting:
            cycle = trail[trail.index(node):] + [node]
            raise ConfigError("hypernym cycle: " + " -> ".join(cycle))
        visiting.add(node)
        acc: set[str] = set()
        for parent in sorted(edges.get(node, ())):
            acc.add(parent)
            acc |= visit(parent, trail + [parent])
        visiting.discard(node)
        closed[node] = frozenset(acc)
        return closed[node]

    for node in sorted(edges):
        visit(node, [node])
    return {k: v for k, v in closed.items() if v}


def load_hypernyms(path: str | Path) -> dict[str, frozenset[str]]:
    edges: dict[str, set[str]] = {}
    for row in _read_rows(path):
        if len(row) != 2:
            raise ConfigError(f"{path}: hypernym rows need exactly two columns, got {row}")
        edges.setdefault(row[0].lower(), set()).add(row[1].lower())
    return hypernym_closure(edges)


@dataclass(frozen=True)
class SemanticMatcher:
    vectors: Mapping[str, np.ndarray] = field(default_factory=dict, repr=False)
    hypernyms: Mapping[str, frozenset[str]] = field(default_factory=dict, repr=False)
    cosine_threshold: float = DEFAULT_COSINE_THRESHOLD

    def __post_init__(self) -> None:
        object.__setattr__(self, "vectors", MappingProxyType(dict(self.vectors)))
        object.__setattr__(self, "hypernyms", MappingProxyType(dict(self.hypernyms)))

    @classmethod
    def load(cls, vectors: str | Path | None = None, hypernyms: str | Path | None = None,
             cosine_threshold: float = DEFAULT_COSINE_THRESHOLD) -> "SemanticMatcher":
        """Load from files; ``None`` selects the bundled fixture resources."""
        return cls(
            load_vectors(vectors or data_path("vectors.txt")),
            load_hypernyms(hypernyms or data_path("hypernyms.tsv")),
            cosine_threshold,
        )

    @classmethod
    def literal(cls) -> "SemanticMatcher":
        """Exact lemma equality only (threshold above any cosine, no lexicon)."""
        return cls({}, {}, 1.01)

    def cosine(self, a: str, b: str) -> float | None:
        va, vb = self.vectors.get(a.lower()), self.vectors.get(b.lower())
        if va is None or vb is None:
            return None
        return float(va @ vb)

    def is_hyponym(self, a: str, b: str) -> bool:
        """True when ``b`` is a (transitive) hypernym of ``a``."""
        return b.lower() in self.hypernyms.get(a.lower(), ())

    def same_category(self, a: str, b: str) -> bool:
        a, b = a.lower().strip(), b.lower().strip()
        if a == b:
            return True
        cos = self.cosine(a, b)
        if cos is not None and cos >= self.cosine_threshold:
            return True
        return self.is_hyponym(a, b) or self.is_hyponym(b, a)


def same_category(a: str, b: str, m: SemanticMatcher) -> bool:
    return m.same_category(a, b)
