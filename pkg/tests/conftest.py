from pathlib import Path

import pytest

from respond.problem import load_spec, make_spec

SPECS = Path(__file__).resolve().parent.parent / "specs"

GOLDEN = 0.6180339887


@pytest.fixture(scope="session")
def cosine_spec():
    """d = 1, omega = 1, g(x) = x + x^2, f = cos t."""
    return load_spec(SPECS / "cosine_d1.json")


@pytest.fixture(scope="session")
def golden_spec():
    """d = 2, omega = (1, golden), g(x) = x + x^2 + x^3, f = cos psi1 + cos psi2."""
    return load_spec(SPECS / "golden_d2.json")


@pytest.fixture(scope="session")
def wide_spec():
    """Two-mode d = 1 forcing with every branching 2..8 allowed."""
    return make_spec([1.0], {(1,): 0.5, (-1,): 0.5}, [0.0] + [1.0] * 8, c0_guess=0.1)


@pytest.fixture
def spec_paths():
    return {"d1": str(SPECS / "cosine_d1.json"), "d2": str(SPECS / "golden_d2.json")}


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "ACCEPT_LINES", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
