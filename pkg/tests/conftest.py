import pytest

_VERDICTS: list[str] = []


@pytest.fixture
def verdict():
    """Record one labelled line for the end-of-run acceptance summary."""
    def record(tag: str, ok, detail: str) -> bool:
        status = "INFO" if ok is None else ("PASS" if ok else "FAIL")
        line = f"{status} {tag}: {detail}"
        _VERDICTS.append(line)
        print(line)
        return bool(ok)
    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in _VERDICTS:
            terminalreporter.write_line(line)
