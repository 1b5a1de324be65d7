import json
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from chainabac.scenarios import load_fixture, load_smart_home  # noqa: E402
from chainabac.system import System  # noqa: E402

DATA = Path(__file__).parent / "data"


def load_data(name: str):
    return json.loads((DATA / name).read_text(encoding="utf-8"))


@pytest.fixture
def system():
    return System.create()


@pytest.fixture
def smart_home():
    s = System.create()
    fx = load_smart_home(s)
    return s, fx


@pytest.fixture(scope="session")
def fixture_data():
    return load_fixture()


ACCEPTANCE_RESULTS: list[tuple[str, bool, str]] = []


def record_acceptance(label: str, ok: bool, detail: str = ""):
    line = f"[{'PASS' if ok else 'FAIL'}] {label}" + (f" :: {detail}" if detail else "")
    print(line)
    ACCEPTANCE_RESULTS.append((label, ok, detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for label, ok, detail in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {label}" + (f" :: {detail}" if detail else ""))
