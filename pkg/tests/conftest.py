from __future__ import annotations

import numpy as np
import pytest
from hypothesis import settings

from higgslab.chart import build_chart, flat_factor, hyperbolic_factor

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture(scope="session")
def disk65():
    ch = build_chart("disk", 65, r_max=0.8)
    return ch, hyperbolic_factor(ch)


@pytest.fixture(scope="session")
def disk129():
    ch = build_chart("disk", 129, r_max=0.8)
    return ch, hyperbolic_factor(ch)


@pytest.fixture(scope="session")
def torus64():
    ch = build_chart("torus", 64)
    return ch, flat_factor(ch)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# one line per acceptance criterion, printed after the run
ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def criterion():
    def record(number: int, ok: bool, detail: str) -> bool:
        ACCEPTANCE[number] = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(ACCEPTANCE[number])
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
