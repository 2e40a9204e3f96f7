"""Shared pytest wiring.

The acceptance checks register one [PASS]/[FAIL] line each; after the
run a dedicated terminal section replays them, outside of pytest's
output capture, so the report always lands in logs and teed files.
"""

import sys


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "REPORT_LINES", None) if mod else None
    if lines:
        terminalreporter.section("acceptance report")
        for line in lines:
            terminalreporter.write_line(line)
