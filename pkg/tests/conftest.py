"""Prints one ACCEPTANCE line per criterion after the run."""

import re
from collections import defaultdict

_CRITERION = re.compile(r"test_acceptance\.py::test_criterion_(\d+)_(\w+?)(?:\[|$)")
_results = defaultdict(list)
_labels = {}


def pytest_runtest_logreport(report):
    match = _CRITERION.search(report.nodeid)
    if not match:
        return
    if report.when == "call" or report.failed or report.skipped:
        number = int(match.group(1))
        _labels[number] = match.group(2).replace("_", " ")
        _results[number].append(report.passed)


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_results):
        verdict = "PASS" if all(_results[number]) else "FAIL"
        terminalreporter.write_line(f"ACCEPTANCE criterion {number} ({_labels[number]}): {verdict}")
