import pytest
from hypothesis import settings

from boundary_probe.harness import Harness, load_fixture, merge

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")


@pytest.fixture
def make_harness():
    """Fresh in-process harness from the default fixture plus overrides."""
    def make(fixture: str = "default", **over):
        return Harness(merge(load_fixture(fixture), over))
    return make


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import VERDICTS

    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(VERDICTS):
            terminalreporter.write_line(VERDICTS[n])
