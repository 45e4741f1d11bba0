"""Shared fixtures and assertion helpers for the phfem test suite."""

import numpy as np
import pytest

import phfem


def assert_relative_error(value, reference, tol, name):
    """Assert |value - reference| <= tol * |reference| with a readable message."""
    err = abs(value - reference)
    scale = abs(reference) if reference != 0.0 else 1.0
    assert err <= tol * scale, (
        f"{name}: got {value!r}, expected {reference!r} "
        f"(relative error {err / scale:.3e} > {tol:.1e})"
    )


@pytest.fixture(scope="session")
def steel():
    return phfem.PlateMaterial(E=210e9, nu=0.3, rho=7850.0, h=0.01)


@pytest.fixture(scope="session")
def steel_rigidity(steel):
    return phfem.plate_rigidity(steel)


@pytest.fixture(scope="session")
def square4():
    return phfem.structured_rectangle(1.0, 1.0, 4, 4)


@pytest.fixture(scope="session")
def square8():
    return phfem.structured_rectangle(1.0, 1.0, 8, 8)


@pytest.fixture(scope="session")
def plate4(steel, square4):
    # dynamic vectorial plate on the 4x4 square; tests must not mutate it
    return phfem.assemble_plate(square4, steel)


@pytest.fixture(scope="session")
def plate8(steel, square8):
    return phfem.assemble_plate(square8, steel)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(1234)
