from __future__ import annotations

import math

import numpy as np
import pytest

from contraction_dos import NSA, LatticeWindow, NonUnitaryBand, build, spectrum_of


def s_of(g: float, B: float) -> float:
    return math.exp(g) + math.exp(-g) + B


def free_laplacian_eigs(N: int) -> np.ndarray:
    k = np.arange(1, N + 1)
    return 2 * np.cos(k * np.pi / (N + 1))


@pytest.fixture
def nsa_small():
    spec = NSA(1.0, 4.0)
    m = build(spec, LatticeWindow(8), 3)
    return spec, m, spectrum_of(m)


@pytest.fixture
def band_small():
    spec = NonUnitaryBand.diagonal(0.25)
    m = build(spec, LatticeWindow.band(8), 5)
    return spec, m, spectrum_of(m)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
