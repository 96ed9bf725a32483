import pytest

_RESULTS: dict[int, tuple[str, str, str]] = {}


@pytest.fixture
def criterion(request):
    """Record one acceptance line: ``report(number, title, passed, detail)``."""

    def report(number: int, title: str, passed: bool, detail: str = "") -> bool:
        _RESULTS[number] = (title, "PASS" if passed else "FAIL", detail)
        return passed

    return report


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        title, verdict, detail = _RESULTS[number]
        line = f"criterion {number} [{verdict}] {title}"
        terminalreporter.write_line(line + (f": {detail}" if detail else ""))
