import numpy as np
import pytest

from topolattice.lattice import HoppingKernel, all_shifts


def random_kernel(rng, d=2, L=2, radius=1, scale=1.0):
    """Dense random kernel with every shift in ``[-radius, radius]^d``."""
    half = {}
    for m in all_shifts(d, radius):
        m = tuple(int(x) for x in m)
        if tuple(-x for x in m) in half:
            continue
        a = scale * (rng.normal(size=(L, L)) + 1j * rng.normal(size=(L, L)))
        if m == (0,) * d:
            a = a + a.conj().T
        half[m] = a
    return HoppingKernel.from_half(half)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report():
    """Record one pass/fail line per acceptance criterion and assert it."""

    def _report(number: int, ok: bool, detail: str) -> None:
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
