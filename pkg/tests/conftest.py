import pytest

CRITERIA: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def criterion():
    """Record one pass/fail line per acceptance criterion: criterion(n, ok, detail)."""

    def record(n: int, ok: bool, detail: str) -> bool:
        ok = bool(ok)
        prev = CRITERIA.get(n)
        if prev is None:
            CRITERIA[n] = (ok, detail)
        else:
            CRITERIA[n] = (ok and prev[0], prev[1] + "; " + detail)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(CRITERIA):
        ok, detail = CRITERIA[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
