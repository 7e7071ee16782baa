import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(12345))


def band_limited(rng, degree=5):
    """Random real polynomial in (x, y), i.e. band-limited in theta."""
    c = rng.standard_normal((degree + 1, degree + 1))
    i, j = np.indices(c.shape)
    c[i + j > degree] = 0.0
    return lambda x, y: np.polynomial.polynomial.polyval2d(x, y, c)


ACCEPTANCE = {}


def record(n: int, ok: bool, detail: str) -> bool:
    """Register one acceptance line; printed again in the terminal summary."""
    line = f"{'PASS' if ok else 'FAIL'} criterion {n:2d}: {detail}"
    ACCEPTANCE[n] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
