import json
import sys
from pathlib import Path

import pytest

HERE = Path(__file__).parent
sys.path.insert(0, str(HERE))

from sectioning import generate_instance  # noqa: E402

_ACCEPTANCE: list[str] = []


@pytest.fixture
def record():
    """Append one summary line for an acceptance criterion; printed at the end."""
    def add(number: int, ok: bool, detail: str) -> bool:
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        _ACCEPTANCE.append(line)
        print(line)
        return ok
    return add


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def tiny_optima():
    return json.loads((HERE / "fixtures" / "tiny_optima.json").read_text())


@pytest.fixture(scope="session")
def tiny():
    cache = {}

    def get(seed: int):
        if seed not in cache:
            cache[seed] = generate_instance("tiny", seed)
        return cache[seed]
    return get
