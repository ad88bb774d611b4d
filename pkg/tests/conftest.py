from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fairkit import cli  # noqa: E402

FIXTURE = Path(__file__).resolve().parents[1] / "src" / "fairkit" / "data" / "crf"
DATA = Path(__file__).parent / "data"
CLOCK = "2026-02-01T09:30:00Z"

ACCEPTANCE_RESULTS: dict = {}


def run_fixture(out: Path, run_id: str = "fixture-run", *extra) -> int:
    return cli.main([
        "run", "--in", str(FIXTURE / "crf.csv"), "--schema", str(FIXTURE / "schema.json"),
        "--map", str(FIXTURE / "mapping.json"), "--out", str(out),
        "--run-id", run_id, "--fixed-clock", CLOCK, *extra,
    ])


@pytest.fixture(scope="session")
def fixture_dir() -> Path:
    return FIXTURE


@pytest.fixture(scope="session")
def run_dir(tmp_path_factory) -> Path:
    """A successful pipeline run over the shipped fixture."""
    out = tmp_path_factory.mktemp("run")
    assert run_fixture(out) == 0
    return out


@pytest.fixture(scope="session")
def bundle_dir(run_dir) -> Path:
    """The run outputs plus completed metadata and the mapping spec."""
    rc = cli.main(["metadata", "build", "--metadata", str(FIXTURE / "metadata.json"),
                   "--data", str(run_dir / "data.nt"), "--out", str(run_dir / "metadata.json")])
    assert rc == 0
    (run_dir / "mapping.json").write_bytes((FIXTURE / "mapping.json").read_bytes())
    return run_dir


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_RESULTS):
        name, ok, detail = ACCEPTANCE_RESULTS[n]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {n}. {name}: {detail}")
