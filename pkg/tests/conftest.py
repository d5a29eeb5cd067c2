import pytest

from qdemon.model import band_config, feedback_config


@pytest.fixture
def fb():
    """Feedback parameters with delta = 1 (finite band)."""
    return feedback_config(1.0)


@pytest.fixture
def band():
    """Infinite-band parameters without feedback."""
    return band_config()


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import LINES

    if LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)
