import numpy as np
import pytest

from skmanifold.spectral import Nonlinearity, QSpectrum


@pytest.fixture(scope="session")
def desk_q():
    return QSpectrum.power_law(16, 4.0, 1.0)


@pytest.fixture(scope="session")
def desk_f():
    return Nonlinearity.sine(0.5)


@pytest.fixture
def rng():
    return np.random.default_rng(2024)


_ACCEPTANCE = []


@pytest.fixture
def verdict(request):
    """Record one acceptance line; printed live and again in the terminal summary."""
    reporter = request.config.pluginmanager.get_plugin("terminalreporter")

    def emit(number: int, name: str, ok: bool, detail: str = "") -> bool:
        line = f"criterion {number:2d} [{'PASS' if ok else 'FAIL'}] {name}" + (f": {detail}" if detail else "")
        _ACCEPTANCE.append((number, line))
        if reporter is not None:
            reporter.write_line("")
            reporter.write_line(line)
        else:
            print(line)
        return ok

    return emit


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_ACCEPTANCE):
            terminalreporter.write_line(line)
