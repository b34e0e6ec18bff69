"""Eigenvalue engines, spectra and empirical (counting) measures."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg
from scipy.optimize import linear_sum_assignment

from .models import NSA, AndersonHermitian, FiniteMatrix, similarity_reduce

DEFAULT_TOL = 1e-12
MAX_DENSE_SIZE = 2048
RESIDUAL_SPOT_CHECKS = 10


class ConvergenceError(RuntimeError):
    """An eigensolver failed to meet its convergence or residual contract."""


@dataclass
class Spectrum:
    """Eigenvalues repeated by algebraic multiplicity, in no particular order.

    ``residual`` is the largest relative backward-error estimate the
    producing solver observed.
    """

    eigenvalues: np.ndarray
    residual: float = 0.0
    source_size: int | None = None

    def __post_init__(self):
        self.eigenvalues = np.asarray(self.eigenvalues, dtype=complex).ravel()
        if self.source_size is None:
            self.source_size = self.eigenvalues.size

    def __len__(self):
        return self.eigenvalues.size

    def to_rows(self):
        return [(float(z.real), float(z.imag)) for z in self.eigenvalues]


@dataclass
class EmpiricalMeasure:
    """Weighted point masses.

    ``locations`` are reals for ``real_line``, angles in ``[0, 2*pi)`` for
    ``circle`` and complex numbers for ``plane``.
    """

    support_kind: str
    locations: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        if self.support_kind not in ("real_line", "circle", "plane"):
            raise ValueError(f"unknown support kind {self.support_kind!r}")
        dtype = complex if self.support_kind == "plane" else float
        self.locations = np.asarray(self.locations, dtype=dtype).ravel()
        self.weights = np.asarray(self.weights, dtype=float).ravel()
        if self.locations.shape != self.weights.shape:
            raise ValueError("locations and weights differ in length")
        if np.any(self.weights < 0):
            raise ValueError("weights must be non-negative")

    @property
    def total_mass(self) -> float:
        return math.fsum(self.weights)

    @classmethod
    def uniform(cls, support_kind: str, locations) -> "EmpiricalMeasure":
        locations = np.asarray(locations).ravel()
        return cls(support_kind, locations, np.full(locations.size, 1.0 / locations.size))

    @classmethod
    def pooled(cls, measures) -> "EmpiricalMeasure":
        """Average of several measures of the same kind (e.g. over disorder seeds)."""
        measures = list(measures)
        kinds = {m.support_kind for m in measures}
        if len(kinds) != 1:
            raise ValueError("cannot pool measures of different support kinds")
        locs = np.concatenate([m.locations for m in measures])
        weights = np.concatenate([m.weights for m in measures]) / len(measures)
        return cls(kinds.pop(), locs, weights)

    def as_plane(self) -> np.ndarray:
        if self.support_kind == "circle":
            return np.exp(1j * self.locations)
        return self.locations.astype(complex)

    def moment(self, p: int, q: int = 0) -> complex:
        """``int z^p conj(z)^q`` against the measure."""
        z = self.as_plane()
        vals = self.weights * z**p * np.conj(z) ** q
        return complex(math.fsum(vals.real), math.fsum(vals.imag))


# ---------------------------------------------------------------------------
# Solvers


def eig_dense(m, tol: float = DEFAULT_TOL, max_size: int = MAX_DENSE_SIZE) -> Spectrum:
    """All eigenvalues of a dense complex matrix.

    The matrix is first balanced by a diagonal similarity (see
    :func:`balance`), then LAPACK's Hessenberg/QR driver does the work. An
    eigenvalue is accepted only if inverse iteration on the balanced matrix
    gives a unit vector ``v`` with ``||(M - lambda) v|| <= 10 * tol * ||M||``;
    this is spot-checked on up to ten eigenvalues.
    """
    a = _as_array(m)
    n = a.shape[0]
    if n > max_size:
        raise ValueError(f"matrix size {n} exceeds the dense-solver cap {max_size}")
    if n == 0:
        raise ValueError("empty matrix")
    a = balance(a)
    try:
        ev = scipy.linalg.eigvals(a, overwrite_a=False, check_finite=True)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise ConvergenceError(f"dense eigensolver did not converge: {exc}") from None
    norm = _norm_bound(a)
    if norm == 0:
        return Spectrum(ev, 0.0, n)
    residual = max((_inverse_iteration_residual(a, lam) for lam in _spot_sample(ev)),
                   default=0.0) / norm
    if residual > 10 * tol:
        raise ConvergenceError(
            f"residual {residual:.3e} exceeds 10*tol = {10 * tol:.1e}; eigenvalues refused")
    return Spectrum(ev, residual, n)


def balance(a, max_log_range: float = 600.0) -> np.ndarray:
    """Diagonal similarity ``D^-1 A D`` that evens out the off-diagonal magnitudes.

    ``log D`` solves the least-squares problem ``log|a_ij| + y_j - y_i ~ 0``
    over the nonzero off-diagonal entries, a graph-Laplacian system. For a
    weighted cycle or a tridiagonal matrix with positive hopping products this
    is the exact symmetrising similarity. Scales are clipped to
    ``max_log_range`` so the result stays finite.
    """
    a = np.asarray(a)
    n = a.shape[0]
    i, j = np.nonzero(a)
    off = i != j
    i, j = i[off], j[off]
    if i.size == 0:
        return a.copy()
    logs = np.log(np.abs(a[i, j]))
    rows = np.arange(i.size)
    design = scipy.sparse.csr_matrix(
        (np.concatenate([np.ones(i.size), -np.ones(i.size)]),
         (np.concatenate([rows, rows]), np.concatenate([j, i]))), shape=(i.size, n))
    y = scipy.sparse.linalg.lsqr(design, -logs, atol=1e-14, btol=1e-14, iter_lim=20 * n)[0]
    y -= np.median(y)
    half = max_log_range / 2
    y = np.clip(y, -half, half)
    d = np.exp(y)
    return a * d[None, :] / d[:, None]


def eig_symtridiag(diag, offdiag, tol: float = DEFAULT_TOL, max_iter: int = 200) -> Spectrum:
    """Eigenvalues of a real symmetric tridiagonal matrix by Sturm-sequence bisection.

    All eigenvalues are bisected simultaneously; the ``k``-th one is bracketed
    by the condition ``count(x) = #{eigenvalues < x} <= k``. Iteration stops
    when every bracket is narrower than ``tol * ||M||``.
    """
    d = np.asarray(diag, dtype=float).ravel()
    e = np.asarray(offdiag, dtype=float).ravel()
    n = d.size
    if n == 0:
        raise ValueError("empty matrix")
    if e.size != n - 1:
        raise ValueError(f"offdiag must have length {n - 1}, got {e.size}")
    if not (np.all(np.isfinite(d)) and np.all(np.isfinite(e))):
        raise ValueError("non-finite entries")
    if n == 1:
        return Spectrum(d.astype(complex), 0.0, 1)

    ae = np.abs(e)
    radius = np.concatenate([[0.0], ae]) + np.concatenate([ae, [0.0]])
    lo = float(np.min(d - radius))
    hi = float(np.max(d + radius))
    norm = max(abs(lo), abs(hi))
    if norm == 0:
        return Spectrum(np.zeros(n, dtype=complex), 0.0, n)
    width = tol * norm
    pivmin = np.finfo(float).tiny / np.finfo(float).eps * max(1.0, float(np.max(e * e)))

    e2 = e * e
    k = np.arange(n)
    left = np.full(n, lo - width)
    right = np.full(n, hi + width)
    for _ in range(max_iter):
        if np.max(right - left) <= width:
            break
        mid = 0.5 * (left + right)
        below = _sturm_count(d, e2, mid, pivmin)
        upper = below > k
        right = np.where(upper, mid, right)
        left = np.where(upper, left, mid)
    else:
        raise ConvergenceError(f"bisection did not reach width {width:.2e} in {max_iter} steps")
    ev = 0.5 * (left + right)
    residual = float(np.max(right - left)) / 2 / norm
    return Spectrum(ev.astype(complex), residual, n)


def _sturm_count(d, e2, x, pivmin):
    """Number of eigenvalues strictly below each entry of ``x`` (vectorised over ``x``)."""
    q = d[0] - x
    q = np.where(np.abs(q) < pivmin, -pivmin, q)
    count = (q < 0).astype(np.int64)
    for i in range(1, d.size):
        q = d[i] - x - e2[i - 1] / q
        q = np.where(np.abs(q) < pivmin, -pivmin, q)
        count += q < 0
    return count


def spectrum_of(m: FiniteMatrix, tol: float = DEFAULT_TOL) -> Spectrum:
    """Spectrum of a built matrix, choosing the solver by model family.

    NSA and Anderson matrices go through the exact symmetric reduction: the
    diagonal similarity that symmetrises an NSA matrix has condition number
    ``e^{2 g n}``, far beyond what a dense non-symmetric solver can resolve.
    """
    if isinstance(m.spec, (NSA, AndersonHermitian)) and m.bc_tag == "dirichlet":
        diag, off = similarity_reduce(m)
        return eig_symtridiag(diag, off, tol)
    return eig_dense(m, tol)


def closed_form_band_eigs(g: float, phases) -> Spectrum:
    """Eigenvalues ``sqrt(g) e^{i mean(omega)} e^{i (j-1) pi / n}`` of the ``C0 = diag(1, g)`` band matrix."""
    phases = np.asarray(phases, dtype=float).ravel()
    two_n = phases.size
    if two_n == 0 or two_n % 2:
        raise ValueError("need an even, positive number of phases")
    j = np.arange(two_n)
    common = math.fsum(phases) / two_n
    ev = math.sqrt(g) * np.exp(1j * common) * np.exp(2j * np.pi * j / two_n)
    return Spectrum(ev, 0.0, two_n)


def spectral_radius(s: Spectrum) -> float:
    if len(s) == 0:
        raise ValueError("spectral radius of an empty spectrum")
    return float(np.max(np.abs(s.eigenvalues)))


def counting_measure(s: Spectrum) -> EmpiricalMeasure:
    """Normalised counting measure: mass ``1/|Lambda|`` on each eigenvalue."""
    return EmpiricalMeasure.uniform("plane", s.eigenvalues)


def moment_distance(mu1: EmpiricalMeasure, mu2: EmpiricalMeasure, K: int) -> float:
    """Largest difference of the monomial moments of total degree ``<= K``.

    Plane (and circle) measures use ``z^p conj(z)^q``; real-line measures use ``x^p``.
    """
    real1, real2 = mu1.support_kind == "real_line", mu2.support_kind == "real_line"
    if real1 != real2:
        raise ValueError("moment_distance needs two real-line or two planar measures")
    worst = 0.0
    for p in range(K + 1):
        qs = [0] if real1 else range(K + 1 - p)
        for q in qs:
            worst = max(worst, abs(mu1.moment(p, q) - mu2.moment(p, q)))
    return worst


def match_sets(a, b) -> tuple[np.ndarray, np.ndarray]:
    """Optimal one-to-one matching of two point sets; returns index arrays."""
    a = np.asarray(a, dtype=complex).ravel()
    b = np.asarray(b, dtype=complex).ravel()
    if a.size != b.size:
        raise ValueError(f"sets differ in size: {a.size} vs {b.size}")
    cost = np.abs(a[:, None] - b[None, :])
    return linear_sum_assignment(cost)


def set_distance(a, b) -> float:
    """Largest matched distance under the optimal matching of two equal-size sets."""
    a = np.asarray(a, dtype=complex).ravel()
    b = np.asarray(b, dtype=complex).ravel()
    if a.size == 0:
        return 0.0
    i, j = match_sets(a, b)
    return float(np.max(np.abs(a[i] - b[j])))


# ---------------------------------------------------------------------------
# helpers


def _as_array(m) -> np.ndarray:
    a = m.entries if isinstance(m, FiniteMatrix) else m
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    return a


def _norm_bound(a) -> float:
    if a.shape[0] <= 256:
        return float(np.linalg.norm(a, 2))
    aa = np.abs(a)
    return math.sqrt(aa.sum(axis=0).max() * aa.sum(axis=1).max())


def _spot_sample(ev):
    if ev.size <= RESIDUAL_SPOT_CHECKS:
        return ev
    idx = np.linspace(0, ev.size - 1, RESIDUAL_SPOT_CHECKS).round().astype(int)
    return ev[idx]


def _inverse_iteration_residual(a, lam) -> float:
    n = a.shape[0]
    shifted = a - lam * np.eye(n)
    # a tiny perturbation keeps the factorisation regular at an exact eigenvalue
    eps = np.finfo(float).eps * max(1.0, abs(lam))
    with warnings.catch_warnings():
        # an exactly singular pivot means lam is exact; the solve below then reports 0
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu = scipy.linalg.lu_factor(shifted + eps * np.eye(n), check_finite=False)
    v = np.ones(n, dtype=complex) / math.sqrt(n)
    for _ in range(2):
        v = scipy.linalg.lu_solve(lu, v, check_finite=False)
        nv = np.linalg.norm(v)
        if not np.isfinite(nv) or nv == 0:
            return 0.0
        v /= nv
    return float(np.linalg.norm(shifted @ v))
