"""Run orchestration, persistence, metrics and reports."""

from .compare import compare_selection_modes
from .config import EndpointConfig, RunConfig, config_from_mapping, load_config
from .corpus import make_corpus
from .metrics import MetricsReport, compute_metrics
from .pipeline import RunSummary, manifest_hash, run_pipeline
from .report import emit_report

__all__ = [
    "EndpointConfig", "MetricsReport", "RunConfig", "RunSummary", "compare_selection_modes",
    "compute_metrics", "config_from_mapping", "emit_report", "load_config", "make_corpus",
    "manifest_hash", "run_pipeline",
]
