import numpy as np
import pytest
from hypothesis import strategies as st

from optstop.dist import EnergyDistribution


def random_distribution(rng: np.random.Generator, max_support: int = 50,
                        integer: bool = False) -> EnergyDistribution:
    """Random discrete distribution with 1..max_support atoms."""
    k = int(rng.integers(1, max_support + 1))
    if integer:
        support = np.sort(rng.choice(np.arange(-200, 200), size=k, replace=False)).astype(float)
    else:
        support = np.unique(np.round(rng.normal(0.0, 10.0, size=k), 6))
    weights = rng.dirichlet(np.ones(support.size))
    return EnergyDistribution.normalized(support, np.maximum(weights, 1e-9))


@st.composite
def distributions(draw, max_support: int = 20):
    k = draw(st.integers(1, max_support))
    support = draw(st.lists(st.integers(-1000, 1000), min_size=k, max_size=k, unique=True))
    weights = draw(st.lists(st.floats(0.01, 1.0), min_size=k, max_size=k))
    return EnergyDistribution.normalized(np.sort(np.array(support, dtype=float)) / 10.0,
                                         np.array(weights))


@pytest.fixture
def coin():
    return EnergyDistribution.from_mapping({0: 0.5, 1: 0.5})


@pytest.fixture
def rng():
    return np.random.default_rng(20261017)


# ------------------------------------------------------------------ acceptance

ACCEPTANCE_COUNT = 11
_acceptance_lines: dict[int, str] = {}


@pytest.fixture
def acceptance():
    """Record one pass/fail line for an acceptance criterion, then assert it."""

    def record(number: int, title: str, ok: bool, detail: str = "") -> None:
        line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}"
        if detail:
            line += f"  [{detail}]"
        _acceptance_lines[number] = line
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_lines:
        return
    terminalreporter.section("acceptance criteria")
    for k in range(1, ACCEPTANCE_COUNT + 1):
        terminalreporter.write_line(_acceptance_lines.get(k, f"criterion {k:2d} FAIL  (not run or raised before a verdict)"))
