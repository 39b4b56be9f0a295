import pytest

# criterion number -> (title, detail); filled by tests/test_acceptance.py
ACCEPTANCE_NOTES: dict[int, list[str]] = {}
_OUTCOMES: dict[int, str] = {}

TITLES = {
    1: "end-to-end correctness vs PlainTAP",
    2: "garbled-circuit sizes of the basic operations",
    3: "DFA match circuits stay within n*q AND gates",
    4: "free-XOR offset holds on every wire",
    5: "authenticity under bit-flip mutations",
    6: "freshness and replay",
    7: "regex circuits agree with a reference engine",
    8: "false predicates reveal nothing",
    9: "per-party latency of the basic operations",
    10: "a day's batch of bundles",
}


@pytest.fixture
def note(request):
    """note(criterion, text): a detail line for the acceptance summary."""
    def add(criterion: int, text: str) -> None:
        ACCEPTANCE_NOTES.setdefault(criterion, []).append(text)
    return add


def pytest_runtest_logreport(report):
    if "test_acceptance.py::test_criterion_" not in report.nodeid:
        return
    n = int(report.nodeid.rsplit("_", 1)[1].split("[")[0])
    if report.when == "call" or report.failed:
        if _OUTCOMES.get(n) != "FAIL":
            _OUTCOMES[n] = "PASS" if report.passed else ("SKIP" if report.skipped else "FAIL")


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(TITLES):
        if n not in _OUTCOMES:
            continue
        tr.write_line(f"criterion {n:>2}: {_OUTCOMES[n]:<4}  {TITLES[n]}")
        for line in ACCEPTANCE_NOTES.get(n, []):
            tr.write_line(f"               {line}")
