import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

# Filled by tests/test_acceptance.py; echoed after the run so the verdicts
# are visible even when pytest captures stdout.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
