import pytest

from chemostat_biogas import GrowthModel, ProcessParams


@pytest.fixture
def contois():
    return GrowthModel.contois(0.74, 1.0)


@pytest.fixture
def haldane():
    return GrowthModel.haldane(0.74, 9.28, 256.0)


@pytest.fixture
def monod():
    return GrowthModel.monod(0.74, 9.28)


@pytest.fixture
def contois_params():
    return ProcessParams(100.0, 1.5)


@pytest.fixture
def haldane_params():
    return ProcessParams(100.0, 3.0)


ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[key])
