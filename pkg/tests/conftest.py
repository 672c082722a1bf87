import json
from pathlib import Path

import pytest

from reducemt.harness import make_corpus


@pytest.fixture(scope="session")
def faithful_corpus(tmp_path_factory) -> Path:
    out = tmp_path_factory.mktemp("faithful")
    make_corpus(out, 20, seed=3, faults="none")
    return out


@pytest.fixture(scope="session")
def mixed_corpus(tmp_path_factory) -> Path:
    out = tmp_path_factory.mktemp("mixed")
    make_corpus(out, 12, seed=5, faults="mixed", relabel_rate=0.3)
    return out


def write_run(run_dir: Path, mp_ids, violations) -> Path:
    """A minimal run directory holding only what metrics reads."""
    run_dir.mkdir(parents=True, exist_ok=True)
    with (run_dir / "mps.jsonl").open("w") as fh:
        for mp_id in mp_ids:
            fh.write(json.dumps({"mp_id": mp_id}) + "\n")
    with (run_dir / "violations.jsonl").open("w") as fh:
        for mp_id, obj in violations:
            fh.write(json.dumps({"mp_id": mp_id, "object": obj, "rule": "R1", "side": "followup",
                                 "hint": "Type2.2"}) + "\n")
    return run_dir


@pytest.fixture
def metrics_fixture(tmp_path):
    """Ten labelled objects giving TP=2, FN=1, FP=1, TN=6."""
    mp_ids = [f"m{i}" for i in range(5)]
    labels = [
        ("m0", "cat", True), ("m0", "dog", True),      # reported: TP, TP
        ("m1", "ball", True),                          # missed: FN
        ("m2", "cup", False),                          # reported: FP
        ("m2", "vase", False), ("m3", "box", False), ("m3", "car", False),
        ("m4", "book", False), ("m4", "clock", False), ("m1", "chair", False),
    ]
    run = write_run(tmp_path / "run", mp_ids, [("m0", "cat"), ("m0", "dog"), ("m2", "cup")])
    path = tmp_path / "labels.jsonl"
    path.write_text("".join(json.dumps({"mp_id": m, "object": o, "violation": v}) + "\n" for m, o, v in labels))
    return run, path


_VERDICTS: list[str] = []


@pytest.fixture
def verdict(request):
    """Record one acceptance criterion outcome, print it, then assert it."""

    def record(ok: bool, detail: str) -> None:
        line = f"{'PASS' if ok else 'FAIL'}  {request.node.name}: {detail}"
        _VERDICTS.append(line)
        print(line)
        assert ok, detail

    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in _VERDICTS:
            terminalreporter.write_line(line)
