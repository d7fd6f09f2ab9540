import numpy as np
import pytest

from condips.kernels import RateKernel


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(params=["iw", "zr", "incl"])
def kernel(request):
    return {
        "iw": RateKernel.independent(),
        "zr": RateKernel.zero_range(4.0),
        "incl": RateKernel.inclusion(1.0),
    }[request.param]


def tv(p, q):
    """Total variation between two probability vectors of any length."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    n = max(p.size, q.size)
    return 0.5 * float(np.abs(np.pad(p, (0, n - p.size)) - np.pad(q, (0, n - q.size))).sum())


_ACCEPTANCE: list[str] = []


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line per acceptance criterion and print it."""

    def record(number: int, ok: bool, detail: str):
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        _ACCEPTANCE.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
