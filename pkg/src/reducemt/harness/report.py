"""Static JSON summary and HTML page for a finished run."""

from __future__ import annotations

import json
from collections import Counter
from html import escape
from pathlib import Path
from typing import Any

from ..errors import ArtifactError
from .pipeline import read_jsonl

REQUIRED = ("manifest.json", "mps.jsonl", "violations.jsonl", "sources.jsonl")

_STYLE = """
body { font-family: sans-serif; margin: 2em; color: #222; }
table.summary td { padding: 0 1em 0 0; }
.mp { border: 1px solid #ccc; margin: 1em 0; padding: 0.6em; }
.mp.violated { border-color: #c33; }
.mp img { image-rendering: pixelated; width: 192px; margin-right: 1em; }
.fate-retain { color: #276; } .fate-disappear { color: #a40; } .fate-ambiguous { color: #777; }
li.violation { color: #c33; }
"""


def summarize(run_dir: Path) -> dict[str, Any]:
    manifest = json.loads((run_dir / "manifest.json").read_text(encoding="utf-8"))
    mps = read_jsonl(run_dir / "mps.jsonl")
    violations = read_jsonl(run_dir / "violations.jsonl")
    violated = {v["mp_id"] for v in violations}
    return {
        "config_hash": manifest["config_hash"],
        "sources": len(manifest["sources"]),
        "skips": len(manifest["skips"]),
        "mps": len(mps),
        "valid_mps": sum(1 for r in mps if r["valid"]),
        "violated_mps": len(violated),
        "violations": len(violations),
        "by_rule": dict(sorted(Counter(v["rule"] for v in violations).items())),
        "by_hint": dict(sorted(Counter(v["hint"] for v in violations).items())),
        "by_mr": {mr: {"mps": sum(1 for r in mps if r["mr"] == mr),
                       "violated_mps": len({r["mp_id"] for r in mps if r["mr"] == mr} & violated)}
                  for mr in sorted({r["mr"] for r in mps})},
    }


def _mp_panel(rec: dict[str, Any], viols: list[dict[str, Any]]) -> str:
    fates = "".join(
        f'<li class="fate-{escape(f["fate"])}">{escape(f["object"])}: {escape(f["fate"])} '
        f'(ratio {f["ratio"]:.3f})</li>' for f in rec["fates"])
    fates += "".join(f"<li>{escape(o)}: unlocated</li>" for o in rec["unlocated"])
    found = "".join(
        f'<li class="violation">{escape(v["rule"])} on {escape(v["object"])} '
        f'({escape(v["side"])} caption, hint {escape(v["hint"])})</li>' for v in viols) or "<li>none</li>"
    spec = escape(json.dumps(rec["spec"], sort_keys=True))
    cls = "mp violated" if viols else "mp"
    return (
        f'<div class="{cls}" id="{escape(rec["mp_id"])}">\n'
        f'<h3>{escape(rec["mp_id"])} <small>{escape(rec["mr"])} {spec}</small></h3>\n'
        f'<img src="{escape(rec["source_image"])}" alt="source"><img src="{escape(rec["followup_image"])}" '
        f'alt="follow-up">\n'
        f'<p>source: &ldquo;{escape(rec["source_caption"])}&rdquo;<br>'
        f'follow-up: &ldquo;{escape(rec["followup_caption"])}&rdquo;</p>\n'
        f'<ul>{fates}</ul>\n<p>violations:</p><ul>{found}</ul>\n</div>\n'
    )


def render_html(summary: dict[str, Any], mps: list[dict[str, Any]], violations: list[dict[str, Any]],
                skips: list[dict[str, Any]]) -> str:
    by_mp: dict[str, list[dict[str, Any]]] = {}
    for v in violations:
        by_mp.setdefault(v["mp_id"], []).append(v)
    rows = "".join(f"<tr><td>{escape(k)}</td><td>{escape(json.dumps(summary[k], sort_keys=True))}</td></tr>"
                   for k in ("sources", "skips", "mps", "valid_mps", "violated_mps", "violations",
                             "by_rule", "by_hint", "by_mr"))
    skipped = "".join(f"<li>{escape(s['source'])} {escape(str(s['mr'] or ''))}: {escape(s['error'])}</li>"
                      for s in skips)
    panels = "".join(_mp_panel(r, by_mp.get(r["mp_id"], [])) for r in mps)
    return (
        "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>Metamorphic test report</title>\n"
        f"<style>{_STYLE}</style></head><body>\n<h1>Metamorphic test report</h1>\n"
        f"<p>config {escape(summary['config_hash'][:16])}</p>\n"
        f'<table class="summary">{rows}</table>\n'
        + (f"<h2>Skipped</h2><ul>{skipped}</ul>\n" if skipped else "")
        + f"<h2>Metamorphic pairs</h2>\n{panels}</body></html>\n"
    )


def emit_report(run_dir: str | Path) -> tuple[Path, Path]:
    """Write ``report.json`` and ``report.html``; identical inputs give identical bytes."""
    run_dir = Path(run_dir)
    missing = [name for name in REQUIRED if not (run_dir / name).exists()]
    mps = read_jsonl(run_dir / "mps.jsonl") if not missing else []
    for rec in mps:
        for key in ("source_image", "followup_image"):
            if not (run_dir / rec[key]).exists():
                missing.append(rec[key])
    if missing:
        raise ArtifactError(f"run directory {run_dir} lacks: {', '.join(sorted(set(missing)))}")
    summary = summarize(run_dir)
    manifest = json.loads((run_dir / "manifest.json").read_text(encoding="utf-8"))
    violations = read_jsonl(run_dir / "violations.jsonl")
    json_path, html_path = run_dir / "report.json", run_dir / "report.html"
    json_path.write_text(json.dumps(summary, sort_keys=True, indent=1) + "\n", encoding="utf-8")
    html_path.write_text(render_html(summary, mps, violations, manifest["skips"]), encoding="utf-8")
    return json_path, html_path
