import numpy as np
import pytest

_REPORT: list[str] = []


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def report():
    """Record one PASS/FAIL line for the terminal summary."""

    def add(criterion: str, passed: bool, detail: str) -> None:
        line = f"{'PASS' if passed else 'FAIL'} criterion {criterion}: {detail}"
        print(line)
        _REPORT.append(line)

    return add


def pytest_terminal_summary(terminalreporter):
    if _REPORT:
        terminalreporter.section("acceptance criteria")
        for line in _REPORT:
            terminalreporter.write_line(line)


def random_spd(rng, dim, cond=10.0):
    a = rng.standard_normal((dim, dim))
    q, _ = np.linalg.qr(a)
    eig = np.geomspace(1.0, cond, dim)
    return (q * eig) @ q.T
