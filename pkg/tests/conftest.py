import numpy as np
import pytest

from solgeo.fields import ResidualReport


def refine(build, levels):
    """Run ``build(n) -> (report, h)`` for each level and stack into one report."""
    reps, hs = zip(*(build(n) for n in levels))
    return ResidualReport.from_levels(list(reps), list(hs))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def sweep():
    return refine


ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def record(num: int, ok: bool, detail: str) -> None:
    ACCEPTANCE[num] = (bool(ok), detail)
    print(f"ACCEPTANCE {num:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[num]
        terminalreporter.write_line(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
