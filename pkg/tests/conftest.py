import numpy as np
import pytest

import bbscore as bb

# Results recorded by tests/test_acceptance.py; one summary line each.
ACCEPTANCE_RESULTS = []


@pytest.fixture
def acceptance():
    """Record a named acceptance-criterion outcome, then assert it."""

    def _record(name: str, passed: bool, detail: str = ""):
        ACCEPTANCE_RESULTS.append((name, bool(passed), detail))
        assert passed, f"acceptance criterion failed: {name} ({detail})"

    return _record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE_RESULTS:
        status = "PASS" if ok else "FAIL"
        line = f"{status}  {name}"
        if detail:
            line += f"  [{detail}]"
        terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_corpus():
    """A handful of simulated latent docs with mixed lengths."""
    return bb.simulate_corpus(12, (5, 24), 4, 1.5, seed=77)
