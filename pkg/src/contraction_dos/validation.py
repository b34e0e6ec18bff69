"""Named invariant checks shared by the CLI subcommands."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .dos import (HoloPoly, circle_quadrature_L, eval_L_finite, eval_L_tilde, moments_spectrum,
                  moments_trace, pairing_L)
from .models import (NSA, AndersonHermitian, Disorder, FiniteMatrix, NonUnitaryBand,
                     ScaledUnitaryBand, nsa_reference_region, similarity_reduce)
from .spectral import (EmpiricalMeasure, Spectrum, closed_form_band_eigs, eig_dense,
                       eig_symtridiag, set_distance, spectral_radius)

SPOT_RESIDUAL_FACTOR = 10
CNU_GAP = 1e-3


@dataclass
class CheckResult:
    name: str
    context: str
    value: float
    threshold: float
    passed: bool
    advisory: bool = False

    def row(self):
        return [self.name, self.context, self.value, self.threshold, self.passed]


CHECK_HEADER = ["check", "context", "value", "threshold", "passed"]


def _check(name, context, value, threshold, *, lower=False, advisory=False):
    value = float(value)
    passed = value >= threshold if lower else value <= threshold
    if math.isnan(value):
        passed = False
    return CheckResult(name, context, value, float(threshold), bool(passed), advisory)


@dataclass
class Realization:
    """One built matrix with its spectrum."""

    n: int
    seed: int
    matrix: FiniteMatrix
    spectrum: Spectrum

    @property
    def context(self) -> str:
        return f"n={self.n} seed={self.seed}"


# ---------------------------------------------------------------------------
# matrix / spectrum checks


def contraction_norm(m: FiniteMatrix) -> float:
    """Schur bound ``sqrt(||M||_1 ||M||_inf)`` when it already certifies ``<= 1``, else the 2-norm."""
    a = np.abs(m.entries)
    bound = math.sqrt(a.sum(axis=0).max() * a.sum(axis=1).max())
    return bound if bound <= 1 else m.norm()


def matrix_checks(r: Realization, solver_tol: float) -> list[CheckResult]:
    spec, m, s = r.matrix.spec, r.matrix, r.spectrum
    ctx = r.context
    out = []
    if not isinstance(spec, AndersonHermitian):
        out.append(_check("contraction", ctx, contraction_norm(m), 1 + 1e-10))
    out.append(_check("residual", ctx, s.residual, SPOT_RESIDUAL_FACTOR * solver_tol))
    trace_dev = abs(np.sum(s.eigenvalues) - np.trace(m.entries))
    out.append(_check("trace", ctx, trace_dev, 1e-8 * m.size))
    if m.size <= 64:
        det = np.linalg.det(m.entries)
        prod = np.prod(s.eigenvalues)
        rel = abs(prod - det) / max(abs(det), 1e-300)
        if abs(det) > 1e-250:
            out.append(_check("determinant", ctx, rel, 1e-6))
    if isinstance(spec, NSA):
        out.append(_check("nsa_reality", ctx, float(np.max(np.abs(s.eigenvalues.imag))), 1e-8))
        out.append(_check("nsa_containment", ctx, nsa_outside_count(spec, s.eigenvalues), 0))
        if m.size <= 256:
            dense = eig_dense(m, solver_tol)
            out.append(_check("similarity", ctx, set_distance(dense.eigenvalues, s.eigenvalues), 1e-8))
    if isinstance(spec, NonUnitaryBand) and spec.coupling[0, 1] == 0 and spec.coupling[1, 0] == 0 \
            and spec.coupling[0, 0] == 1 and spec.scale == 1:
        g = spec.coupling[1, 1].real
        closed = closed_form_band_eigs(g, Disorder(r.seed).phases(m.sites, spec.phases))
        out.append(_check("band_closed_form", ctx,
                          set_distance(closed.eigenvalues, s.eigenvalues), 1e-8))
    if isinstance(spec, ScaledUnitaryBand):
        dev = float(np.max(np.abs(np.abs(s.eigenvalues) - spec.r)))
        out.append(_check("unitary_moduli", ctx, dev, 1e-10))
    return out


def nsa_outside_count(spec: NSA, ev, tol: float = 1e-8) -> int:
    """Eigenvalues off the real segment ``[-(2+B), 2+B] / s``.

    Finite-volume NSA spectra are those of a Hermitian Anderson matrix scaled
    by ``1/s``. When ``B >= e^g + e^-g`` the infinite-volume region is a
    filled set containing that segment and is checked as well; for smaller
    ``B`` it has a hole that finite-volume eigenvalues may occupy.
    """
    ev = np.asarray(ev, dtype=complex)
    bad = (np.abs(ev.imag) > tol) | (np.abs(ev.real) > (2 + spec.B) / spec.scale + tol)
    if spec.full_spectrum_formula_valid:
        bad |= ~nsa_reference_region(spec.g, spec.B, 256).contains(ev, tol)
    return int(np.count_nonzero(bad))


# ---------------------------------------------------------------------------
# DOS routes


def route_values(f: HoloPoly, r: Realization, b, quad_tol: float) -> dict:
    L = eval_L_finite(f, r.spectrum)
    vals = {"L": L, "pairing": pairing_L(f, b)}
    if spectral_radius(r.spectrum) < 1 - CNU_GAP:
        vals["quad"] = circle_quadrature_L(f, r.spectrum, quad_tol)
    return vals


def dos_checks(r: Realization, functions, tol: float, K: int) -> list[CheckResult]:
    ctx = r.context
    out = []
    b = moments_trace(r.matrix, K)
    b_spec = moments_spectrum(r.spectrum, K)
    out.append(_check("normalization", ctx, abs(b[0] - 1), 0.0))
    out.append(_check("moment_consistency", ctx, float(np.max(np.abs(b - b_spec))), 1e-8))
    for f in functions:
        vals = route_values(f, r, b, min(tol, 1e-10) / 10)
        fctx = f"{ctx} f={f.name}"
        if "quad" in vals:
            out.append(_check("three_route_quad", fctx, abs(vals["L"] - vals["quad"]), tol))
        out.append(_check("three_route_pairing", fctx, abs(vals["L"] - vals["pairing"]), tol))
    one = HoloPoly((1,))
    out.append(_check("L_of_one", ctx, abs(eval_L_finite(one, r.spectrum) - 1), 1e-12))
    return out


def finite_propagation_check(spec, window, seed, f: HoloPoly, ctx: str) -> CheckResult:
    base = eval_L_tilde(f, spec, window, seed)
    wider = eval_L_tilde(f, spec, window, seed, margin=f.degree * spec.bandwidth + 2 * spec.cell_size)
    return _check("finite_propagation", f"{ctx} f={f.name}", abs(base - wider), 1e-12)


def gauge_checks(r: Realization, f: HoloPoly, quad_tol: float = 1e-13) -> list[CheckResult]:
    if spectral_radius(r.spectrum) >= 1 - CNU_GAP:
        return []
    base = circle_quadrature_L(f, r.spectrum, quad_tol)
    out = []
    for m in (1, 2, 5):
        shifted = circle_quadrature_L(f, r.spectrum, quad_tol, gauge=HoloPoly.monomial(m))
        out.append(_check("gauge", f"{r.context} f={f.name} m={m}", abs(shifted - base), 1e-10))
    return out


# ---------------------------------------------------------------------------
# kernel checks


def poisson_normalization_checks() -> list[CheckResult]:
    out = []
    t = 2 * np.pi * np.arange(4096) / 4096
    for r in (0.1, 0.5, 0.9):
        val = math.fsum(kernels.poisson_kernel(r, t)) / t.size
        out.append(_check("poisson_normalization", f"r={r}", abs(val - 1), 1e-10))
    return out


def random_circle_measure(rng, atoms: int) -> EmpiricalMeasure:
    w = rng.random(atoms)
    return EmpiricalMeasure("circle", 2 * np.pi * rng.random(atoms), w / w.sum())


def poisson_positivity_checks(rng, measures: int = 20, radii=(0.3, 0.7, 0.95),
                              grid: int = 1024, extra=()) -> list[CheckResult]:
    """``Re psi^(r)(e^{it}) - 1/2 >= -1e-12`` plus the Poisson two-route identity."""
    t = 2 * np.pi * np.arange(grid) / grid
    z = np.exp(1j * t)
    dks = [(f"random#{i}", random_circle_measure(rng, int(rng.integers(1, 40))))
           for i in range(measures)]
    dks.extend(extra)
    worst_low = math.inf
    worst_route = 0.0
    for _, dk in dks:
        for r in radii:
            direct = kernels.psi_r_unitary(dk, r, z)
            worst_low = min(worst_low, float(np.min(direct.real - 0.5)))
            worst_route = max(worst_route, float(np.max(np.abs(
                direct - kernels.psi_r_boundary_poisson(dk, r, t)))))
    ctx = f"{len(dks)} measures, r in {list(radii)}"
    return [_check("poisson_positivity", ctx, worst_low, -1e-12, lower=True),
            _check("poisson_two_route", ctx, worst_route, 1e-10)]


def uniform_circle_check(r: float = 0.9, atoms: int = 256) -> CheckResult:
    dk = EmpiricalMeasure.uniform("circle", 2 * np.pi * np.arange(atoms) / atoms)
    t = 2 * np.pi * np.arange(1024) / 1024
    dev = float(np.max(np.abs(kernels.psi_r_unitary(dk, r, np.exp(1j * t)) - 1)))
    # only Fourier modes that are multiples of ``atoms`` survive: error ~ r^atoms
    return _check("uniform_circle_psi", f"r={r} atoms={atoms}", dev, 2 * r**atoms / (1 - r**atoms) + 1e-13)


def herglotz_check(dk: EmpiricalMeasure, rng, probes: int = 100) -> CheckResult:
    z = rng.uniform(-6, 6, probes) + 1j * rng.uniform(1e-3, 3, probes)
    return _check("herglotz", f"{probes} probes", float(np.min(kernels.borel_transform(dk, z).imag)),
                  0.0, lower=True)


def psi_two_route_checks(r: Realization) -> list[CheckResult]:
    from .dos import psi_Lambda

    rho = spectral_radius(r.spectrum)
    radius = 0.9 / rho if rho > 0 else 0.9
    z = radius * np.exp(2j * np.pi * np.arange(16) / 16) * np.linspace(0.1, 1, 16)
    dm = EmpiricalMeasure.uniform("plane", r.spectrum.eigenvalues)
    dev = float(np.max(np.abs(kernels.psi_from_plane_measure(dm, z) - psi_Lambda(r.spectrum, z))))
    return [_check("psi_two_route", r.context, dev, 1e-12)]


def psi_g_checks(dk: EmpiricalMeasure, g: float, B: float, ctx: str) -> list[CheckResult]:
    s = math.exp(g) + math.exp(-g) + B
    rad = s / (2 + B)
    z = rad * np.array([0.5 + 0.2j, -0.3 + 0.6j, 0.8j, 0.9, -0.7, 0.1 - 0.1j]) / 1.0
    direct = kernels.psi_g_nsa(dk, g, B, z)
    via = kernels.psi_g_via_borel(dk, g, B, z)
    out = [_check("psi_g_two_route", ctx, float(np.max(np.abs(direct - via))), 1e-12)]
    # Taylor coefficients by a Cauchy integral against the moment formula
    K = 6
    rho = 0.5 * rad
    nodes = 256
    w = rho * np.exp(2j * np.pi * np.arange(nodes) / nodes)
    vals = kernels.psi_g_nsa(dk, g, B, w)
    coeffs = np.fft.fft(vals) / nodes / rho ** np.arange(nodes)
    expected = np.array([dk.moment(k).real / s**k for k in range(K + 1)])
    out.append(_check("psi_g_taylor", ctx, float(np.max(np.abs(coeffs[:K + 1] - expected))), 1e-10))
    return out


def bergman_checks(r: Realization, tol: float = 1e-6) -> list[CheckResult]:
    if spectral_radius(r.spectrum) >= 1 - CNU_GAP:
        return []
    report = kernels.harmonic_density_check(r.spectrum, kernels.DiskGrid(64, 256), tol=tol)
    ctx = r.context
    return [
        _check("bergman_reproducing", ctx, max(report.integral_devs.values()), tol),
        _check("harmonic_fd_vs_closed_form", ctx, report.closed_form_max_dev, 1e-6),
        _check("harmonic_laplacian_order", ctx, min(report.laplacian_orders), 1.8, lower=True),
    ]


def anderson_dos(B: float, potential: str, window, seeds) -> tuple[EmpiricalMeasure, list]:
    """Pooled counting measure of the Anderson spectra over ``seeds``."""
    from .models import build

    spec = AndersonHermitian(B, potential)
    spectra = []
    for seed in seeds:
        m = build(spec, window, seed)
        d, e = similarity_reduce(m)
        spectra.append(eig_symtridiag(d, e).eigenvalues.real)
    dk = EmpiricalMeasure.pooled([EmpiricalMeasure.uniform("real_line", s) for s in spectra])
    return dk, spectra


def combined_moment_checks(anderson_spectra, nsa_moments, s: float, K: int,
                           ctx: str, factor: float = 3.0) -> list[CheckResult]:
    """NSA trace moments against ``int x^k dk / s^k`` within ``factor`` combined standard errors."""
    am = np.array([[np.mean(e**k) for k in range(K + 1)] for e in anderson_spectra])
    nm = np.asarray(nsa_moments).real
    out = []
    for k in range(1, K + 1):
        a = am[:, k] / s**k
        b = nm[:, k]
        se = math.hypot(a.std(ddof=1) / math.sqrt(a.size), b.std(ddof=1) / math.sqrt(b.size))
        z = abs(a.mean() - b.mean()) / se if se > 0 else (0.0 if a.mean() == b.mean() else math.inf)
        out.append(_check("nsa_moments_vs_dk", f"{ctx} k={k}", z, factor))
    return out
