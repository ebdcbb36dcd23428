import pytest

from sinrlab.sinr import SinrParams


@pytest.fixture
def unit_params():
    return SinrParams.with_unit_range()


def pytest_terminal_summary(terminalreporter):
    import sys

    verdicts = {}
    for name, module in list(sys.modules.items()):
        if name.endswith("test_acceptance") and hasattr(module, "VERDICTS"):
            verdicts.update(module.VERDICTS)
    if not verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(verdicts):
        terminalreporter.write_line(verdicts[number])
