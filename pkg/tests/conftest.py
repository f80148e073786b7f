import warnings

import pytest

from gasket_fgf.spectral import BoundaryProjectionWarning

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def no_projection_warning():
    with warnings.catch_warnings():
        warnings.simplefilter("error", BoundaryProjectionWarning)
        yield


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
