"""Shared pytest hooks: print one line per acceptance criterion at the end."""

import sys


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = []
    for name, module in sys.modules.items():
        if name.rpartition(".")[2] == "test_acceptance":
            results = getattr(module, "CRITERION_RESULTS", [])
            break
    if not results:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for line in results:
        terminalreporter.write_line(line)
