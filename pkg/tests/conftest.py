import sys
from pathlib import Path

# Make the sibling oracles module importable from every test file.
sys.path.insert(0, str(Path(__file__).parent))

import pytest

DATA_DIR = Path(__file__).parent.parent / "data"

# Verdict lines collected by the acceptance tests; echoed after the run so
# they stay visible whatever capture mode pytest is in.
ACCEPTANCE_VERDICTS: list[str] = []


@pytest.fixture(scope="session")
def mini_corpus_dir() -> Path:
    return DATA_DIR / "mini_corpus"


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_VERDICTS:
            terminalreporter.write_line(line)
