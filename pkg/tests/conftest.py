import pytest

_ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def acceptance():
    """Record a one-line verdict that survives into the terminal summary."""

    def record(tag: str, ok: bool, detail: str):
        _ACCEPTANCE_LINES.append(
            f"{'PASS' if ok else 'FAIL'}  {tag}: {detail}")
        assert ok, f"{tag}: {detail}"

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _ACCEPTANCE_LINES:
        terminalreporter.write_sep("-", "acceptance summary")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
