"""Shared pytest wiring: surface the acceptance criterion lines.

The acceptance tests record one `[criterion N] PASS/FAIL` line each;
output capture would hide the lines for passing tests, so a terminal
summary hook replays them after the run.
"""

CRITERION_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if not CRITERION_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in CRITERION_LINES:
        terminalreporter.write_line(line)
