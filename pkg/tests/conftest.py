"""Prints one PASS/FAIL line per acceptance criterion at the end of the run."""

import re

_results: dict[int, tuple[str, str, str]] = {}


def pytest_runtest_logreport(report):
    match = re.search(r"test_acceptance\.py::test_criterion_(\d+)_(\w+)", report.nodeid)
    if not match:
        return
    number, name = int(match.group(1)), match.group(2).replace("_", " ")
    detail = "; ".join(str(v) for k, v in report.user_properties if k == "detail")
    if report.skipped:
        outcome = "SKIP"
        if not detail and isinstance(report.longrepr, tuple):
            detail = str(report.longrepr[-1]).removeprefix("Skipped: ")
    elif report.when == "call":
        outcome = "PASS" if report.passed else "FAIL"
    elif report.failed:
        outcome = "FAIL"
    else:
        return
    _results[number] = (outcome, name, detail)


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_results):
        outcome, name, detail = _results[number]
        line = f"{outcome} criterion {number}: {name}"
        terminalreporter.write_line(f"{line} ({detail})" if detail else line)
