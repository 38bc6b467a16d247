from __future__ import annotations

import pytest

CRITERIA = pytest.StashKey[dict]()


@pytest.fixture
def criteria(request) -> dict:
    """Shared table of acceptance outcomes, keyed by criterion number."""
    return request.config.stash.setdefault(CRITERIA, {})


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash.get(CRITERIA, {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        ok, name, detail = results[n]
        terminalreporter.write_line(f"criterion {n:2d} {'PASS' if ok else 'FAIL'}  {name}: {detail}")
