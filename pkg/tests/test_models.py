from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from contraction_dos import (NSA, AndersonHermitian, Disorder, LatticeWindow, NonUnitaryBand,
                             ScaledUnitaryBand, build, build_anderson, build_band, build_nsa,
                             eig_dense, nsa_reference_region, similarity_reduce)
from contraction_dos.models import ModelError, model_from_dict
from contraction_dos.spectral import eig_symtridiag, set_distance
from contraction_dos.validation import nsa_outside_count

from conftest import free_laplacian_eigs, s_of


# -- windows -----------------------------------------------------------------

def test_window_sizes():
    assert LatticeWindow(3).size == 7
    assert LatticeWindow(3, cell_size=2).size == 14
    assert LatticeWindow.band(5).size == 10
    assert list(LatticeWindow(1).sites) == [-1, 0, 1]


def test_windows_nest_centered():
    small, big = LatticeWindow(2).sites, LatticeWindow(5).sites
    assert set(small) <= set(big)
    assert small[0] - big[0] == big[-1] - small[-1]


def test_padded_sites_whole_cells():
    w = LatticeWindow.band(3)
    padded = w.padded_sites(3)
    assert padded.size == w.size + 8
    assert (w.first_site - padded[0]) % 2 == 0


# -- disorder ----------------------------------------------------------------

def test_disorder_is_per_site():
    d = Disorder(42)
    a = d.potential(np.arange(-5, 6), 3.0)
    b = d.potential(np.arange(-50, 51), 3.0)
    assert np.array_equal(a, b[45:56])


def test_disorder_ranges():
    d = Disorder(7)
    v = d.potential(np.arange(2000), 2.5)
    ph = d.phases(np.arange(2000))
    assert v.min() >= -2.5 and v.max() <= 2.5
    assert ph.min() >= 0 and ph.max() < 2 * np.pi
    assert set(np.unique(d.potential(np.arange(200), 2.0, "bernoulli"))) <= {-2.0, 2.0}


def test_disorder_seeds_differ():
    assert not np.array_equal(Disorder(1).uniforms(np.arange(10), 1),
                              Disorder(2).uniforms(np.arange(10), 1))


# -- NSA -----------------------------------------------------------------------

def test_nsa_free_3x3():
    m = build_nsa(0.0, 2.0, LatticeWindow(1), 0, "zero")
    ev = np.sort(np.linalg.eigvals(m.entries).real)
    expected = np.array([-2 * math.cos(math.pi / 4), 0.0, 2 * math.cos(math.pi / 4)]) / 4
    assert np.allclose(ev, expected, atol=1e-14)
    assert np.isclose(expected[-1], 0.35355339, atol=1e-8)


def test_nsa_entries():
    g, B = 0.7, 2.0
    m = build_nsa(g, B, LatticeWindow(4), 11)
    s = s_of(g, B)
    a = m.entries
    assert np.allclose(np.diag(a, -1), math.exp(-g) / s)
    assert np.allclose(np.diag(a, 1), math.exp(g) / s)
    omega = Disorder(11).potential(LatticeWindow(4).sites, B)
    assert np.allclose(np.diag(a), omega / s)
    assert np.count_nonzero(np.triu(a, 2)) == 0 and np.count_nonzero(np.tril(a, -2)) == 0


def test_nsa_real_spectrum_at_critical_B():
    B = math.e + 1 / math.e
    m = build_nsa(1.0, B, LatticeWindow(20), 4)
    assert np.max(np.abs(eig_dense(m).eigenvalues.imag)) < 1e-8


def test_zero_disorder_ignores_seed():
    w = LatticeWindow(5)
    assert np.array_equal(build_nsa(0.5, 2.0, w, 1, "zero").entries,
                          build_nsa(0.5, 2.0, w, 99, "zero").entries)


@settings(max_examples=25, deadline=None)
@given(g=st.floats(0, 3), B=st.floats(0.01, 10), n=st.integers(1, 20), seed=st.integers(0, 2**40))
def test_nsa_is_contraction(g, B, n, seed):
    assert build_nsa(g, B, LatticeWindow(n), seed).is_contraction()


def test_nsa_rejects_bad_params():
    with pytest.raises(ModelError):
        NSA(1.0, 0.0)
    with pytest.raises(ModelError):
        NSA(-0.1, 1.0)
    with pytest.raises(ModelError):
        build_nsa(1.0, 1.0, LatticeWindow(0), 0)
    with pytest.raises(ModelError):
        build_nsa(1.0, 1.0, LatticeWindow(3, cell_size=2), 0)


# -- Anderson ------------------------------------------------------------------

def test_anderson_free_5x5():
    m = build_anderson(1.0, LatticeWindow(2), 0, "zero")
    ev = np.sort(np.linalg.eigvalsh(m.entries.real))
    assert np.allclose(ev, np.sort(free_laplacian_eigs(5)), atol=1e-14)


def test_anderson_symmetric_and_nested():
    a = build_anderson(3.0, LatticeWindow(4), 8).entries
    b = build_anderson(3.0, LatticeWindow(9), 8).entries
    assert np.array_equal(a, a.T)
    assert np.array_equal(np.diag(a), np.diag(b)[5:14])


# -- band families -------------------------------------------------------------

def test_band_two_by_two():
    m = build_band(NonUnitaryBand.diagonal(0.25, "zero"), LatticeWindow.band(1), 0)
    assert np.allclose(m.entries, [[0, 0.25], [1, 0]])
    assert np.allclose(np.sort(np.linalg.eigvals(m.entries).real), [-0.5, 0.5])


@pytest.mark.parametrize("n", [1, 3, 8])
def test_rotation_band_is_unitary(n):
    m = build_band(ScaledUnitaryBand(1.0, 0.4), LatticeWindow.band(n), 2)
    a = m.entries
    assert np.linalg.norm(a.conj().T @ a - np.eye(a.shape[0])) < 1e-12


@pytest.mark.parametrize("n", [2, 5, 16])
def test_band_eigenvalue_sum_zero(n):
    m = build_band(NonUnitaryBand.diagonal(0.36), LatticeWindow.band(n), n)
    assert abs(np.sum(eig_dense(m).eigenvalues)) < 1e-10


def test_band_bandwidth():
    a = build_band(NonUnitaryBand(0.5, 0.6, 0.3, -0.4), LatticeWindow.band(6), 1).entries
    N = a.shape[0]
    i, j = np.nonzero(a)
    d = np.abs(i - j)
    assert np.all((d <= 2) | (d >= N - 2))


def test_band_rejects_non_contraction():
    with pytest.raises(ModelError):
        NonUnitaryBand(1.0, 1.0, 1.0, 1.0)


def test_cnu_flag():
    assert NonUnitaryBand(0.5, 0.6, 0.3, -0.4).is_cnu
    # |alpha| = 1 violates the sufficient condition even though spr = sqrt(g) < 1
    assert not NonUnitaryBand.diagonal(0.25).is_cnu
    assert not NonUnitaryBand(1.0, 0.0, 0.0, 1.0).is_cnu


def test_model_dict_roundtrip():
    for spec in (NSA(1.0, 4.0), AndersonHermitian(3.0, "bernoulli"),
                 NonUnitaryBand(0.5, 0.6j, 0.3, -0.4), ScaledUnitaryBand(0.7, 0.2)):
        assert model_from_dict(spec.to_dict()) == spec
    with pytest.raises(ModelError):
        model_from_dict({"family": "nsa", "g": 1.0, "B": 2.0, "colour": "red"})


# -- reference region / reduction ---------------------------------------------

def test_region_g0_is_segment():
    reg = nsa_reference_region(0.0, 1.5)
    s = s_of(0, 1.5)
    assert np.allclose(reg.curves[0].imag, 0)
    assert np.isclose(reg.curves[0].real.max(), 3.5 / s)
    assert reg.contains(np.array([3.5 / s, 0.1])).all()
    assert not reg.contains(np.array([0.1j])).any()


def test_region_ellipse_semi_axes_without_B():
    g = 0.8
    reg = nsa_reference_region(g, 0.0, 1024)
    s = s_of(g, 0)
    outer = reg.curves[0]
    assert np.isclose(np.abs(outer.real).max(), (math.exp(g) + math.exp(-g)) / s)
    assert np.isclose(np.abs(outer.imag).max(), (math.exp(g) - math.exp(-g)) / s, rtol=1e-5)


@pytest.mark.parametrize("seed", range(3))
def test_finite_spectra_inside_filled_region(seed):
    g, B = 1.0, 3.5  # B >= e + 1/e: the region has no hole
    m = build_nsa(g, B, LatticeWindow(30), seed)
    ev = eig_symtridiag(*similarity_reduce(m)).eigenvalues
    assert nsa_reference_region(g, B).contains(ev, 1e-8).all()


@pytest.mark.parametrize("seed", range(3))
def test_finite_spectra_on_segment(seed):
    g, B = 1.0, 2.0
    m = build_nsa(g, B, LatticeWindow(30), seed)
    ev = eig_symtridiag(*similarity_reduce(m)).eigenvalues
    assert np.all(np.abs(ev.real) <= (2 + B) / s_of(g, B) + 1e-12)
    assert nsa_outside_count(NSA(g, B), ev) == 0


def test_region_hole_excludes_origin():
    assert not nsa_reference_region(1.0, 2.0).contains(np.array([0.0]))[0]


def test_similarity_reduce():
    m = build_nsa(1.0, 3.0, LatticeWindow(2), 0, "zero")
    d, e = similarity_reduce(m)
    assert np.allclose(e, 1 / s_of(1.0, 3.0), atol=1e-15)
    m0 = build_nsa(0.0, 3.0, LatticeWindow(6), 1)
    d0, e0 = similarity_reduce(m0)
    assert np.allclose(d0, np.diag(m0.entries).real) and np.allclose(e0, np.diag(m0.entries, 1).real)


@pytest.mark.parametrize("seed", range(3))
def test_reduced_matches_dense(seed):
    m = build_nsa(1.0, 4.0, LatticeWindow(25), seed)
    reduced = eig_symtridiag(*similarity_reduce(m)).eigenvalues
    assert set_distance(reduced, eig_dense(m).eigenvalues) < 1e-8


def test_reduce_rejects_band():
    with pytest.raises(ModelError):
        similarity_reduce(build_band(NonUnitaryBand.diagonal(0.25), LatticeWindow.band(2), 0))
