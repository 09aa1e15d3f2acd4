"""Shared pytest configuration.

Acceptance tests carry a ``criterion(number, description)`` marker; after the
run, one PASS/FAIL line per criterion is printed so the verdicts can be read
without scanning the full test log.  A criterion with several test legs
passes only if every leg passed.
"""

import pytest


def pytest_configure(config):
    config.addinivalue_line(
        "markers",
        "criterion(number, description): acceptance-criterion verdict line",
    )
    config._criterion_verdicts = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    failed_in_setup = report.when == "setup" and not report.passed
    if report.when == "call" or failed_in_setup:
        number, description = marker.args
        entry = item.config._criterion_verdicts.setdefault(number, [description, []])
        entry[1].append(report.passed)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    verdicts = getattr(config, "_criterion_verdicts", {})
    if not verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(verdicts):
        description, outcomes = verdicts[number]
        verdict = "PASS" if outcomes and all(outcomes) else "FAIL"
        terminalreporter.write_line(f"[criterion {number:2d}] {verdict} — {description}")
