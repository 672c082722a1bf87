"""Command-line entry point: ``reducemt {run,metrics,report,compare,localize,corpus}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from ..errors import AdapterError, ArtifactError, ConfigError, InputDomainError
from .config import RunConfig, config_from_mapping, load_config

EXIT_OK, EXIT_USAGE, EXIT_ADAPTER, EXIT_PARTIAL = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse exits with 2, which here means adapter failure
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="TOML run configuration")
    p.add_argument("--images", type=Path, help="source image directory")
    p.add_argument("--output", type=Path, help="run directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--k", type=int, help="follow-ups per source and MR")
    p.add_argument("--mrs", help="comma-separated subset of MR1,MR2,MR3")
    p.add_argument("--concurrency", type=int)
    p.add_argument("--t-down", type=float, dest="t_down")
    p.add_argument("--t-up", type=float, dest="t_up")
    p.add_argument("--cosine", type=float)
    p.add_argument("--od-score", type=float, dest="od_score")
    p.add_argument("--literal", action="store_true", default=None, dest="literal_matching",
                   help="exact lemma matching instead of semantic matching")
    p.add_argument("--verbose", action="store_true", default=None, help="write selection traces")


def build_config(args: argparse.Namespace) -> RunConfig:
    if args.config is not None:
        cfg = load_config(args.config)
    elif args.images is not None:
        cfg = config_from_mapping({"images": str(args.images)})
    else:
        raise ConfigError("either --config or --images is required")
    overrides = {k: getattr(args, k, None) for k in
                 ("images", "output", "seed", "k", "concurrency", "t_down", "t_up", "cosine", "od_score",
                  "literal_matching", "verbose")}
    if getattr(args, "mrs", None):
        overrides["mrs"] = tuple(m.strip().upper() for m in args.mrs.split(",") if m.strip())
    if getattr(args, "mode", None):
        overrides["selection_mode"] = args.mode
    return cfg.with_overrides(**overrides)


def cmd_run(args: argparse.Namespace) -> int:
    from .pipeline import run_pipeline
    from .report import emit_report

    cfg = build_config(args)
    summary = run_pipeline(cfg, resume=args.resume, overwrite=args.overwrite)
    emit_report(summary.run_dir)
    print(json.dumps({"run_dir": str(summary.run_dir), "sources": summary.sources, "mps": summary.mps,
                      "violations": summary.violations, "skips": len(summary.skips)}, sort_keys=True))
    for s in summary.skips:
        print(f"skipped {s['source']} {s['mr'] or ''}: {s['error']}", file=sys.stderr)
    return summary.exit_code


def cmd_metrics(args: argparse.Namespace) -> int:
    from .metrics import compute_metrics

    levels = ["object", "case"] if args.level == "both" else [args.level]
    out = [compute_metrics(args.run_dir, args.labels, lvl).to_json() for lvl in levels]
    print(json.dumps(out if len(out) > 1 else out[0], sort_keys=True, indent=1))
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    from .report import emit_report

    json_path, html_path = emit_report(args.run_dir)
    print(json_path.read_text(encoding="utf-8"), end="")
    print(f"wrote {html_path}", file=sys.stderr)
    return EXIT_OK


def cmd_compare(args: argparse.Namespace) -> int:
    from .compare import compare_selection_modes, format_table

    cfg = build_config(args)
    modes = [m.strip() for m in args.modes.split(",")] if args.modes else None
    result = compare_selection_modes(cfg, modes) if modes else compare_selection_modes(cfg)
    print(json.dumps(result, sort_keys=True, indent=1) if args.json else format_table(result))
    return EXIT_PARTIAL if result["skipped"] else EXIT_OK


def cmd_localize(args: argparse.Namespace) -> int:
    from ..alignment import dump_localization
    from .pipeline import RunContext, prepare_source

    if args.config is None and args.images is None:
        args.images = args.image.parent
    cfg = build_config(args).with_overrides(mrs=("MR3",))
    with RunContext(cfg) as ctx:
        prep = prepare_source(ctx, args.image)
    out = {"caption": prep.caption.text, "detections": [d.to_json() for d in prep.detections],
           "localization": prep.localization.to_json()}
    if args.dump:
        out["index"] = str(dump_localization(prep.localization, args.dump, prep.stem))
    print(json.dumps(out, sort_keys=True, indent=1))
    return EXIT_OK


def cmd_corpus(args: argparse.Namespace) -> int:
    from .corpus import make_corpus

    paths = make_corpus(args.output, args.n, args.seed, args.faults, args.relabel_rate, args.jitter)
    print(f"wrote {len(paths)} scenes to {args.output}")
    return EXIT_OK


def make_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="reducemt", description="Metamorphic testing of image captioning systems.")
    ap.add_argument("--log-level", default="WARNING")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="run the full pipeline over an image directory")
    _add_run_flags(p)
    p.add_argument("--mode", choices=["full", "no_ambiguity", "no_diversity", "random"])
    p.add_argument("--resume", action="store_true", help="continue an interrupted run")
    p.add_argument("--overwrite", action="store_true", help="replace an existing run")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("metrics", help="score a run against labels")
    p.add_argument("run_dir", type=Path)
    p.add_argument("--labels", type=Path, required=True, help="JSON Lines {mp_id, object, violation}")
    p.add_argument("--level", choices=["object", "case", "both"], default="both")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("report", help="write report.json and report.html for a run")
    p.add_argument("run_dir", type=Path)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("compare", help="compare follow-up selection strategies")
    _add_run_flags(p)
    p.add_argument("--modes", help="comma-separated subset of full,no_ambiguity,no_diversity,random")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("localize", help="caption and localize a single image")
    p.add_argument("image", type=Path)
    _add_run_flags(p)
    p.add_argument("--dump", type=Path, help="write PBM masks and a JSON index here")
    p.set_defaults(func=cmd_localize)

    p = sub.add_parser("corpus", help="write a seeded synthetic corpus")
    p.add_argument("output", type=Path)
    p.add_argument("--n", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--faults", default="none", choices=["none", "omit", "misclassify", "fabricate", "mixed"])
    p.add_argument("--relabel-rate", type=float, default=0.0, dest="relabel_rate")
    p.add_argument("--jitter", type=int, default=0)
    p.set_defaults(func=cmd_corpus)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ArtifactError, InputDomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except AdapterError as exc:
        print(f"adapter failure: {exc}", file=sys.stderr)
        return EXIT_ADAPTER


if __name__ == "__main__":
    sys.exit(main())
