"""Finite-volume density-of-states toolkit for random contraction operators."""
from __future__ import annotations

from .dos import (DOSReport, HoloPoly, circle_quadrature_L, eval_L_finite, eval_L_tilde,
                  expectation_L, pairing_L, phi_Lambda, psi_Lambda)
from .models import (NSA, AndersonHermitian, Disorder, FiniteMatrix, LatticeWindow,
                     NonUnitaryBand, ScaledUnitaryBand, build, build_anderson, build_band,
                     build_nsa, nsa_reference_region, similarity_reduce)
from .spectral import (EmpiricalMeasure, Spectrum, closed_form_band_eigs, counting_measure,
                       eig_dense, eig_symtridiag, moment_distance, spectral_radius, spectrum_of)

__version__ = "0.1.0"
