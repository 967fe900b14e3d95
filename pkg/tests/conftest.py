import numpy as np
import pytest

from ctrg import T_CRITICAL, TruncationPolicy
from ctrg.strip import StripSpec, ctrg_strip

T_GRID = (1.0, T_CRITICAL, 4.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


class StripReferences:
    """CTRG strip free energies at large chi, computed once per session."""

    def __init__(self):
        self._cache = {}

    def get(self, width: int, temperature: float, chi: int, boundary: str = "periodic"):
        key = (width, temperature, chi, boundary)
        if key not in self._cache:
            spec = StripSpec(width, temperature, boundary)
            self._cache[key] = ctrg_strip(spec, TruncationPolicy(chi)).free_energy
        return self._cache[key]


@pytest.fixture(scope="session")
def strip_refs():
    return StripReferences()


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion():
    """``report(number, ok, detail)`` records one pass/fail line per criterion."""

    def report(number: int, ok: bool, detail: str) -> bool:
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
