"""Shared pytest plumbing for the suite.

The acceptance module records one verdict line per criterion through
``record_verdict``; the terminal-summary hook replays them after the run,
outside pytest's output capture, so the gate can be skimmed at the bottom
of any test log.
"""

_verdict_lines: list[str] = []


def record_verdict(line: str) -> None:
    _verdict_lines.append(line)


def pytest_terminal_summary(terminalreporter):
    if _verdict_lines:
        terminalreporter.section("acceptance criteria")
        for line in _verdict_lines:
            terminalreporter.write_line(line)
