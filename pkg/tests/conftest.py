import numpy as np
import pytest

from lockin_thermo.core import ThermalSequence

_ACCEPTANCE = []


@pytest.fixture
def criterion():
    """Record one acceptance line; the summary is printed at the end of the run."""

    def record(label, passed, detail):
        line = f"[{'PASS' if passed else 'FAIL'}] {label}: {detail}"
        _ACCEPTANCE.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)


def make_sequence(values, fps=30.0, t0=0.0):
    values = np.asarray(values, dtype=np.float64)
    return ThermalSequence(t0 + np.arange(values.shape[0]) / fps, values)
