import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

# filled by the acceptance suite, printed after the run so the verdicts are
# visible even with output capturing on
VERDICTS: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in VERDICTS:
            terminalreporter.write_line(line)
