"""Confusion-matrix metrics of reported violations against human labels."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Iterable, Mapping

from ..errors import ArtifactError, ConfigError
from .pipeline import read_jsonl

LEVELS = ("object", "case")


def _ratio(num: int, den: int) -> float | None:
    return num / den if den else None


@dataclass(frozen=True)
class MetricsReport:
    level: str
    tp: int
    fn: int
    fp: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fn + self.fp + self.tn

    @property
    def accuracy(self) -> float | None:
        return _ratio(self.tp + self.tn, self.total)

    @property
    def precision(self) -> float | None:
        return _ratio(self.tp, self.tp + self.fp)

    @property
    def recall(self) -> float | None:
        return _ratio(self.tp, self.tp + self.fn)

    @property
    def f1(self) -> float | None:
        p, r = self.precision, self.recall
        if p is None or r is None or p + r == 0:
            return None
        return 2 * p * r / (p + r)

    def to_json(self) -> dict[str, Any]:
        data = asdict(self)
        data.update(accuracy=self.accuracy, precision=self.precision, recall=self.recall, f1=self.f1)
        return data


def load_labels(path: str | Path) -> list[dict[str, Any]]:
    """Labels are JSON Lines ``{"mp_id", "object", "violation"}``; a row without
    ``object`` labels the whole case."""
    rows = []
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
                if not isinstance(row["violation"], bool):
                    raise TypeError("violation must be a boolean")
                row["mp_id"] = str(row["mp_id"])
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ConfigError(f"{path}:{lineno}: bad label row ({exc})") from exc
            rows.append(row)
    return rows


def confusion(truth: Mapping[Any, bool], reported: Iterable[Any], level: str) -> MetricsReport:
    reported = set(reported)
    tp = fn = fp = tn = 0
    for unit, positive in truth.items():
        hit = unit in reported
        if positive and hit:
            tp += 1
        elif positive:
            fn += 1
        elif hit:
            fp += 1
        else:
            tn += 1
    return MetricsReport(level, tp, fn, fp, tn)


def compute_metrics(run_dir: str | Path, labels: str | Path | list[dict[str, Any]], level: str = "object"
                    ) -> MetricsReport:
    if level not in LEVELS:
        raise ConfigError(f"level must be one of {LEVELS}")
    run_dir = Path(run_dir)
    if not (run_dir / "mps.jsonl").exists():
        raise ArtifactError(f"{run_dir} has no mps.jsonl")
    rows = load_labels(labels) if not isinstance(labels, list) else labels
    known = {r["mp_id"] for r in read_jsonl(run_dir / "mps.jsonl")}
    unknown = sorted({r["mp_id"] for r in rows} - known)
    if unknown:
        raise ConfigError(f"labels name mp_ids absent from the run: {', '.join(unknown)}")
    violations = read_jsonl(run_dir / "violations.jsonl")
    if level == "object":
        truth = {(r["mp_id"], r["object"]): r["violation"] for r in rows if r.get("object") is not None}
        reported = {(v["mp_id"], v["object"]) for v in violations}
    else:
        truth: dict[Any, bool] = {}
        for r in rows:
            truth[r["mp_id"]] = truth.get(r["mp_id"], False) or r["violation"]
        reported = {v["mp_id"] for v in violations}
    return confusion(truth, reported, level)
