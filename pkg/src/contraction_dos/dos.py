"""The DOS functional at finite volume.

For a finite-volume matrix ``T`` with eigenvalues ``lambda_j`` and a polynomial
``f(z) = sum a_n z^n`` the functional is evaluated along several routes that
must agree:

* ``eval_L_finite``: ``mean_j f(lambda_j)``, the trace per unit volume of ``f(T)``;
* ``circle_quadrature_L``: ``int f(e^{it}) phi(e^{it}) dt / 2pi`` with
  ``phi(e^{it}) = mean_j 1 / (1 - lambda_j e^{-it})``;
* ``pairing_L``: ``sum_n conj(b_n) a_n`` with ``b_n = tr((T^*)^n) / |Lambda|``.

``eval_L_tilde`` computes the diagonal average of ``f`` applied to the
infinite-volume operator, made exact for polynomials by building the model on
a window padded by ``deg(f) * bandwidth`` sites.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .models import FiniteMatrix, LatticeWindow, ModelSpec, build, matrix_on_sites
from .spectral import Spectrum, spectral_radius, spectrum_of

CNU_MARGIN = 1e-10
QUAD_START_NODES = 64
QUAD_MAX_NODES = 2**16
MAX_PADDED_SIZE = 4096


class RepresentationError(ValueError):
    """The requested integral representation does not exist for these inputs."""


class QuadratureError(RuntimeError):
    """Quadrature did not converge before the node cap."""


@dataclass(frozen=True)
class HoloPoly:
    """Polynomial ``sum_n a_n z^n`` used as a test function on the closed disk."""

    coefficients: tuple
    name: str = ""

    def __post_init__(self):
        coeffs = tuple(complex(c) for c in self.coefficients)
        if not coeffs:
            raise ValueError("a polynomial needs at least one coefficient")
        object.__setattr__(self, "coefficients", coeffs)
        if not self.name:
            object.__setattr__(self, "name", _default_name(coeffs))

    @classmethod
    def monomial(cls, k: int) -> "HoloPoly":
        return cls((0,) * k + (1,))

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    @property
    def supnorm_bound(self) -> float:
        return math.fsum(abs(c) for c in self.coefficients)

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        out = np.zeros_like(z)
        for c in reversed(self.coefficients):
            out = out * z + c
        return out

    def of_matrix(self, m: np.ndarray) -> np.ndarray:
        """``f(M)`` by Horner's scheme on matrices."""
        m = np.asarray(m, dtype=complex)
        eye = np.eye(m.shape[0], dtype=complex)
        out = self.coefficients[-1] * eye
        for c in reversed(self.coefficients[:-1]):
            out = out @ m + c * eye
        return out


def _default_name(coeffs):
    terms = []
    for k, c in enumerate(coeffs):
        if c == 0:
            continue
        coef = f"{c.real:g}" if c.imag == 0 else f"({c.real:g}{c.imag:+g}j)"
        mono = "" if k == 0 else ("z" if k == 1 else f"z^{k}")
        if mono and coef == "1":
            coef = ""
        terms.append(f"{coef}{'*' if coef and mono else ''}{mono}")
    return "+".join(terms) or "0"


# ---------------------------------------------------------------------------
# finite-volume functionals


def eval_L_finite(f: HoloPoly, s: Spectrum) -> complex:
    """``L_Lambda(f) = (1/|Lambda|) sum_j f(lambda_j)``."""
    if len(s) == 0:
        raise ValueError("empty spectrum")
    return _mean(f(s.eigenvalues))


def phi_Lambda(s: Spectrum, t) -> np.ndarray:
    """Boundary density ``phi(e^{it}) = mean_j 1 / (1 - lambda_j e^{-it})``."""
    _require_cnu(s)
    t = np.asarray(t, dtype=float)
    w = np.exp(-1j * t)
    out = np.zeros(w.shape, dtype=complex)
    for lam in s.eigenvalues:
        out += 1.0 / (1.0 - lam * w)
    return out / len(s)


def psi_Lambda(s: Spectrum, z) -> np.ndarray:
    """``psi(z) = mean_j 1 / (1 - conj(lambda_j) z)``, holomorphic on ``|z| < 1/spr``."""
    z = np.asarray(z, dtype=complex)
    rho = spectral_radius(s)
    if np.any(np.abs(z) * rho >= 1.0):
        raise RepresentationError(f"psi is only defined for |z| < 1/spr = {1 / rho if rho else np.inf:.6g}")
    out = np.zeros(z.shape, dtype=complex)
    for lam in s.eigenvalues:
        out += 1.0 / (1.0 - np.conj(lam) * z)
    return out / len(s)


def psi_series(b, z) -> np.ndarray:
    """Truncated power series ``sum_k b_k z^k``."""
    z = np.asarray(z, dtype=complex)
    out = np.zeros(z.shape, dtype=complex)
    for c in reversed(list(b)):
        out = out * z + c
    return out


def moments_trace(m: FiniteMatrix | np.ndarray, K: int) -> np.ndarray:
    """``b_k = tr((M^*)^k) / |Lambda|`` for ``k = 0..K`` by repeated multiplication."""
    if K < 0:
        raise ValueError("K must be non-negative")
    a = m.entries if isinstance(m, FiniteMatrix) else np.asarray(m)
    adj = np.conj(a.T).astype(complex)
    n = a.shape[0]
    b = np.empty(K + 1, dtype=complex)
    b[0] = 1.0
    power = np.eye(n, dtype=complex)
    for k in range(1, K + 1):
        power = power @ adj
        b[k] = np.trace(power) / n
    return b


def moments_spectrum(s: Spectrum, K: int) -> np.ndarray:
    """``b_k = mean_j conj(lambda_j)^k`` from the eigenvalues."""
    lam = np.conj(s.eigenvalues)
    return np.array([_mean(lam**k) for k in range(K + 1)])


def eval_L_tilde(f: HoloPoly, spec: ModelSpec, window: LatticeWindow, seed: int,
                 margin: int | None = None) -> complex:
    """``(1/|Lambda|) tr(P_Lambda f(T) P_Lambda)`` for the infinite-volume ``T``.

    Entries of ``T^k`` on ``Lambda`` only involve sites within ``k * w`` of
    ``Lambda``, so building the model on a window padded by
    ``deg(f) * bandwidth`` sites gives the exact value. A larger ``margin``
    may be passed to check this.
    """
    if margin is None:
        margin = f.degree * spec.bandwidth
    if margin < f.degree * spec.bandwidth:
        raise ValueError("margin smaller than deg(f) * bandwidth gives a truncated value")
    sites = window.padded_sites(margin)
    if sites.size > MAX_PADDED_SIZE:
        raise ValueError(f"padded window has {sites.size} sites, above the cap {MAX_PADDED_SIZE}")
    padded = matrix_on_sites(spec, sites, seed, window=window)
    lo = int(window.first_site - sites[0])
    block = f.of_matrix(padded.entries)
    diag = np.diag(block)[lo:lo + window.size]
    return _mean(diag)


def boundary_defect_trace_norm(spec: ModelSpec, window: LatticeWindow, seed: int) -> float:
    """Trace norm of ``P_Lambda (T - T^Lambda (+) T^{Lambda^c})``.

    Compares the rows of the infinite-volume operator on ``Lambda`` with the
    finite-volume matrix; reported as a diagnostic for the ``o(|Lambda|)``
    hypothesis rather than asserted.
    """
    w = spec.bandwidth
    sites = window.padded_sites(2 * w)
    bulk = matrix_on_sites(spec, sites, seed, window=window).entries
    lo = int(window.first_site - sites[0])
    rows = bulk[lo:lo + window.size, :].copy()
    rows[:, lo:lo + window.size] -= build(spec, window, seed).entries
    return float(np.sum(np.linalg.svd(rows, compute_uv=False)))


def circle_quadrature_L(f: HoloPoly, s: Spectrum, tol: float = 1e-12,
                        gauge: HoloPoly | None = None) -> complex:
    """``int f(e^{it}) phi(e^{it}) dt/2pi`` by the trapezoid rule with node doubling.

    ``gauge`` adds ``G(e^{it})`` with ``G(0) = 0`` to ``phi``; such terms do
    not change the value.
    """
    _require_cnu(s)
    if gauge is not None and gauge.coefficients[0] != 0:
        raise ValueError("a gauge term must vanish at the origin")
    nodes = QUAD_START_NODES
    previous = None
    while nodes <= QUAD_MAX_NODES:
        t = 2.0 * np.pi * np.arange(nodes) / nodes
        density = phi_Lambda(s, t)
        if gauge is not None:
            density = density + gauge(np.exp(1j * t))
        value = _mean(f(np.exp(1j * t)) * density)
        if previous is not None and abs(value - previous) < tol:
            return value
        previous = value
        nodes *= 2
    raise QuadratureError(
        f"trapezoid rule not converged at {QUAD_MAX_NODES} nodes (spr = {spectral_radius(s):.6g})")


def pairing_L(f: HoloPoly, b) -> complex:
    """``sum_n conj(b_n) a_n``."""
    b = np.asarray(b, dtype=complex)
    if b.size <= f.degree:
        raise ValueError(f"need at least {f.degree + 1} moments, got {b.size}")
    a = np.asarray(f.coefficients)
    vals = np.conj(b[:a.size]) * a
    return complex(math.fsum(vals.real), math.fsum(vals.imag))


# ---------------------------------------------------------------------------
# disorder averages


@dataclass
class MCEstimate:
    mean: complex
    stderr: float
    samples: np.ndarray = field(repr=False)


def expectation_L(f: HoloPoly, spec: ModelSpec, window: LatticeWindow, seeds,
                  route: str = "tilde", threads: int = 1) -> MCEstimate:
    """Sample mean and standard error of ``L~_Lambda(f)`` (or ``L_Lambda(f)``) over seeds.

    Samples are reduced in seed order with exactly rounded sums, so the result
    does not depend on ``threads``.
    """
    seeds = list(seeds)
    if len(seeds) < 2:
        raise ValueError("need at least two seeds")
    if route == "tilde":
        def one(seed):
            return eval_L_tilde(f, spec, window, seed)
    elif route == "finite":
        def one(seed):
            return eval_L_finite(f, spectrum_of(build(spec, window, seed)))
    else:
        raise ValueError(f"unknown route {route!r}")
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            samples = np.array(list(pool.map(one, seeds)), dtype=complex)
    else:
        samples = np.array([one(seed) for seed in seeds], dtype=complex)
    mean, stderr = mean_stderr(samples)
    return MCEstimate(mean, stderr, samples)


def mean_stderr(samples) -> tuple[complex, float]:
    """Mean and standard error of complex samples (``|x - mean|^2`` variance)."""
    x = np.asarray(samples, dtype=complex)
    n = x.size
    mean = _mean(x)
    var = math.fsum(np.abs(x - mean) ** 2) / (n - 1)
    return mean, math.sqrt(var / n)


# ---------------------------------------------------------------------------
# reports


@dataclass
class DOSReport:
    model: dict
    window: dict
    seeds: list
    moments: list
    phi_samples: list
    psi_samples: list
    L_values: dict
    Ltilde_values: dict
    quad_values: dict
    pairing_values: dict
    mc_mean: dict
    mc_stderr: dict
    checks: dict

    def to_json_dict(self) -> dict:
        return _jsonable(asdict(self))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _mean(x) -> complex:
    x = np.asarray(x, dtype=complex).ravel()
    return complex(math.fsum(x.real), math.fsum(x.imag)) / x.size


def _require_cnu(s: Spectrum):
    rho = spectral_radius(s)
    if rho >= 1 - CNU_MARGIN:
        raise RepresentationError(f"spr = {rho:.12g} is not below 1; the circle representation breaks down")
