import pytest

from helpers import REFERENCE
from loanmix.equilibrium import FDE, PR


@pytest.fixture(params=REFERENCE)
def scenario_name(request):
    return request.param


@pytest.fixture(params=[PR, FDE])
def regime(request):
    return request.param


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.report_lines():
        terminalreporter.write_line(line)
