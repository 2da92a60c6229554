"""Shared test fixtures plus the acceptance-criteria summary.

Tests in test_acceptance.py carry a ``criterion`` marker naming the
guarantee they check; the terminal summary prints one PASS/FAIL/SKIP
line per criterion after the normal pytest output.
"""

import pytest


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "criterion(name): names an acceptance criterion for the summary"
    )
    config._criterion_names = {}


def pytest_collection_modifyitems(config, items):
    for item in items:
        marker = item.get_closest_marker("criterion")
        if marker is not None:
            config._criterion_names[item.nodeid] = marker.args[0]


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    names = getattr(config, "_criterion_names", {})
    if not names:
        return
    outcomes = {}
    for status in ("passed", "failed", "error", "skipped"):
        for report in terminalreporter.stats.get(status, []):
            nodeid = getattr(report, "nodeid", None)
            if nodeid in names:
                # a failed setup/teardown should override an earlier pass
                if outcomes.get(nodeid) not in ("failed", "error"):
                    outcomes[nodeid] = status
    labels = {"passed": "PASS", "failed": "FAIL", "error": "FAIL", "skipped": "SKIP"}
    terminalreporter.section("acceptance criteria")
    for nodeid, name in names.items():
        status = outcomes.get(nodeid, "not run")
        terminalreporter.write_line(f"{labels.get(status, status):>4}  {name}")
