import pytest

_results = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_results] = {}


@pytest.fixture
def criterion(request):
    """Log a sub-check of an acceptance criterion for the end-of-run summary."""
    table = request.config.stash[_results]

    def record(number: int, passed: bool, detail: str, informational: bool = False) -> bool:
        entry = table.setdefault(number, {"checks": [], "informational": informational})
        entry["checks"].append((bool(passed), detail))
        return bool(passed)

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    table = config.stash.get(_results, {})
    if not table:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(table):
        entry = table[number]
        ok = all(p for p, _ in entry["checks"])
        status = "PASS" if ok else "FAIL"
        if entry["informational"]:
            status += " (informational)"
        details = "; ".join(d for _, d in entry["checks"])
        terminalreporter.write_line(f"criterion {number}: {status} - {details}")
