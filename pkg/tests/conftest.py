import os
import sys

sys.path.insert(0, os.path.dirname(__file__))

import twoparty  # noqa: E402


def pytest_terminal_summary(terminalreporter):
    if twoparty.ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(twoparty.ACCEPTANCE, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
