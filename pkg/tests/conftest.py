import numpy as np
import pytest

from parastab.discretization import build_mesh, linear_heterogeneous, mobility_flux, p_laplace_flux
from parastab.monotone import preset_pair
from parastab.solver import ProblemSpec


def zero_source(x, t):
    return np.zeros_like(np.asarray(x, dtype=float))


def sine(x):
    return np.sin(np.pi * np.asarray(x, dtype=float))


@pytest.fixture
def heat_spec():
    return ProblemSpec(
        pair=preset_pair("identity"),
        flux=linear_heterogeneous(),
        source=zero_source,
        initial=sine,
        horizon=0.1,
    )


@pytest.fixture
def stefan_spec():
    return ProblemSpec(
        pair=preset_pair("stefan"),
        flux=linear_heterogeneous(),
        source=zero_source,
        initial=lambda x: 2.0 * sine(x),
        horizon=0.1,
    )


@pytest.fixture
def richards_spec():
    return ProblemSpec(
        pair=preset_pair("richards-saturation"),
        flux=mobility_flux(),
        source=zero_source,
        initial=lambda x: 2.0 * sine(x),
        horizon=0.1,
    )


def plaplace_spec(p):
    return ProblemSpec(
        pair=preset_pair("identity"),
        flux=p_laplace_flux(p),
        source=zero_source,
        initial=sine,
        horizon=0.1,
    )


@pytest.fixture
def mesh64():
    return build_mesh(64)


@pytest.fixture
def times100():
    return np.linspace(0.0, 0.1, 101)
