import json
import os
from pathlib import Path

import pytest

from asdcd import load_dataset

DATA = Path(__file__).parent / "data"
TOYS = ("toy40", "toy200", "toy500")


def toy_path(name: str) -> Path:
    return DATA / f"{name}.svm"


def cpu_count() -> int:
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:
        return os.cpu_count() or 1


@pytest.fixture(scope="session")
def toys():
    return {name: load_dataset(toy_path(name)) for name in TOYS}


@pytest.fixture(scope="session")
def optima():
    with open(DATA / "optima.json") as fh:
        return json.load(fh)


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE_LINES: dict[str, str] = {}


@pytest.fixture
def criterion():
    def record(key: str, ok, detail: str) -> bool:
        status = "SKIP" if ok is None else ("PASS" if ok else "FAIL")
        ACCEPTANCE_LINES[key] = f"{status}  {key}: {detail}"
        return bool(ok)

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES, key=lambda k: int(k.split()[0][1:])):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
