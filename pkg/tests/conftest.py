"""Shared test helpers: fixture loading and solver availability."""

from __future__ import annotations

from pathlib import Path

import pytest

from yulverify.yul.parse import parse_unit

FIXTURES = Path(__file__).parent / "fixtures"


def load_unit(name: str):
    """Parse a fixture by bare name ('sum_squares', 'straightline/s01')."""
    path = FIXTURES / f"{name}.yul"
    return parse_unit(path.read_text(), source_name=path.name)


def fixture_text(name: str) -> str:
    return (FIXTURES / f"{name}.yul").read_text()


@pytest.fixture(scope="session")
def solver_available() -> bool:
    from yulverify.smt.drive import available_backends

    names = available_backends()
    if "z3" not in names:
        pytest.fail(
            "the default solver backend is unavailable (node/z3-solver "
            "missing); solver-dependent tests cannot be trusted to pass"
        )
    return True
