"""Collects one verdict line per acceptance criterion and prints them at the end of the run."""

import re

VERDICTS: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(VERDICTS, key=lambda k: (int(re.match(r"\d+", k).group()), k)):
        terminalreporter.write_line(VERDICTS[key])
