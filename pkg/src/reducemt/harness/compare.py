"""Run the same corpus under several follow-up selection strategies and tabulate the outcome."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Any, Sequence

from ..errors import AdapterError, InputDomainError
from ..selection import SELECTION_MODES
from .config import RunConfig
from .pipeline import RunContext, list_images, prepare_source, run_followups

METRICS = ("mps", "valid_objects", "valid_cases", "violations", "distinct_objects", "distinct_cases")


def _empty() -> dict[str, Any]:
    return {"mps": 0, "valid_objects": 0, "valid_cases": 0, "violations": 0,
            "_objects": set(), "_cases": set()}


def compare_selection_modes(config: RunConfig, modes: str | Sequence[str] = SELECTION_MODES) -> dict[str, Any]:
    """Counts per mode: MPs, valid objects and cases, violations, and the distinct
    (source, object) pairs and sources that at least one violation covers."""
    modes = [modes] if isinstance(modes, str) else list(modes)
    images = list_images(config.images)
    table = {m: _empty() for m in modes}
    skipped = []
    with RunContext(config) as ctx, ThreadPoolExecutor(config.concurrency) as pool:

        def one(path):
            try:
                prep = prepare_source(ctx, path)
                return path.stem, {m: run_followups(ctx, prep, m)[0] for m in modes}
            except (AdapterError, InputDomainError, OSError, ValueError) as exc:
                return path.stem, exc

        for stem, result in pool.map(one, images):
            if isinstance(result, Exception):
                skipped.append({"source": stem, "error": f"{type(result).__name__}: {result}"})
                continue
            for mode, pairs in result.items():
                row = table[mode]
                for _, mp in pairs:
                    row["mps"] += 1
                    row["valid_objects"] += len(mp.s_retain) + len(mp.s_disappear)
                    row["valid_cases"] += int(mp.is_valid)
                    row["violations"] += len(mp.violations)
                    for v in mp.violations:
                        row["_objects"].add((stem, v.object))
                        row["_cases"].add(stem)
    for row in table.values():
        row["distinct_objects"] = len(row.pop("_objects"))
        row["distinct_cases"] = len(row.pop("_cases"))
    return {"sources": len(images), "skipped": skipped, "modes": table}


def format_table(result: dict[str, Any]) -> str:
    header = ["mode"] + list(METRICS)
    rows = [[mode] + [str(counts[k]) for k in METRICS] for mode, counts in result["modes"].items()]
    widths = [max(len(r[i]) for r in [header] + rows) for i in range(len(header))]
    return "\n".join("  ".join(c.ljust(w) for c, w in zip(r, widths)) for r in [header] + rows)
