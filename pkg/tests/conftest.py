import pytest

ACCEPTANCE_LINES = []


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""

    def record(number, title, ok, detail=""):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number:>2}: {title}" + (f" ({detail})" if detail else "")
        ACCEPTANCE_LINES.append((number, line))
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    name = item.name
    if report.when != "call" or not name.startswith("test_criterion_"):
        return
    number = int(name.split("_")[2])
    if report.failed and not any(n == number for n, _ in ACCEPTANCE_LINES):
        title = " ".join(name.split("_")[3:])
        ACCEPTANCE_LINES.append((number, f"FAIL criterion {number:>2}: {title} (raised {call.excinfo.typename})"))
