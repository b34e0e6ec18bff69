"""Finite-volume random contractions on one-dimensional lattice windows.

Four model families are supported:

* ``NSA``: the non-self-adjoint (Hatano-Nelson) Anderson model, rescaled by
  ``s(g) = e^g + e^-g + B`` so that it is a contraction, Dirichlet boundary.
* ``AndersonHermitian``: the unscaled Hermitian Anderson model ``H(0)``.
* ``NonUnitaryBand`` / ``ScaledUnitaryBand``: random-phase band matrices built
  from a 2x2 coupling ``C0 = [[alpha, beta], [gamma, delta]]``, closed into a
  single cycle at the window edges.

Disorder is counter-based: the value on site ``k`` depends only on
``(seed, k)``, so nested windows built from the same seed share their sites.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import ClassVar, Union

import numpy as np

CONTRACTION_SLACK = 1e-10

_POTENTIAL_DISTS = ("uniform", "bernoulli", "zero")
_PHASE_DISTS = ("uniform", "zero")

# Philox counter words used to separate the potential and phase streams.
_POTENTIAL_STREAM = 1
_PHASE_STREAM = 2


class ModelError(ValueError):
    """Invalid model parameters or window."""


# ---------------------------------------------------------------------------
# Windows


@dataclass(frozen=True)
class LatticeWindow:
    """A window of consecutive lattice sites made of cells of ``cell_size`` sites.

    The default (symmetric) window is the union of the ``2n+1`` translates
    ``-n..n`` of the cell, i.e. sites ``-n*p .. (n+1)*p - 1``. An anchored
    window holds ``n`` cells starting at site 1 (sites ``1 .. n*p``); the band
    families use it with ``p = 2`` so that ``|Lambda| = 2n``.
    """

    half_width: int
    cell_size: int = 1
    anchored: bool = False

    def __post_init__(self):
        if int(self.half_width) != self.half_width or self.half_width < 0:
            raise ModelError(f"half_width must be a non-negative integer, got {self.half_width}")
        if int(self.cell_size) != self.cell_size or self.cell_size < 1:
            raise ModelError(f"cell_size must be a positive integer, got {self.cell_size}")
        if self.anchored and self.half_width < 1:
            raise ModelError("anchored windows need at least one cell")

    @classmethod
    def band(cls, n: int) -> "LatticeWindow":
        """Sites ``1..2n`` as used for the band families."""
        return cls(n, 2, anchored=True)

    @property
    def size(self) -> int:
        if self.anchored:
            return self.half_width * self.cell_size
        return (2 * self.half_width + 1) * self.cell_size

    @property
    def first_site(self) -> int:
        return 1 if self.anchored else -self.half_width * self.cell_size

    @property
    def sites(self) -> np.ndarray:
        return np.arange(self.first_site, self.first_site + self.size, dtype=np.int64)

    def padded_sites(self, margin: int) -> np.ndarray:
        """Sites of the window grown by ``margin`` sites on each side.

        The margin is rounded up to a whole number of cells so that the cell
        structure (e.g. the parity of band sites) is preserved.
        """
        p = self.cell_size
        margin = -(-int(margin) // p) * p
        return np.arange(self.first_site - margin, self.first_site + self.size + margin,
                         dtype=np.int64)

    def to_dict(self) -> dict:
        return {"half_width": self.half_width, "cell_size": self.cell_size,
                "anchored": self.anchored}


# ---------------------------------------------------------------------------
# Model specifications


@dataclass(frozen=True)
class NSA:
    """Non-self-adjoint Anderson model ``e^-g phi_{j-1} + e^g phi_{j+1} + omega_j phi_j``."""

    g: float
    B: float
    potential: str = "uniform"

    family: ClassVar[str] = "nsa"
    bandwidth: ClassVar[int] = 1
    cell_size: ClassVar[int] = 1

    def __post_init__(self):
        if not self.B > 0:
            raise ModelError(f"B must be positive, got {self.B}")
        if not self.g >= 0:
            raise ModelError(f"g must be non-negative, got {self.g}")
        _check_dist(self.potential, _POTENTIAL_DISTS)

    @property
    def scale(self) -> float:
        """The normalisation ``s(g) = e^g + e^-g + B``."""
        return math.exp(self.g) + math.exp(-self.g) + self.B

    @property
    def full_spectrum_formula_valid(self) -> bool:
        return self.B >= math.exp(self.g) + math.exp(-self.g)

    def limit_spectral_radius(self) -> float:
        """Infinite-volume limit of ``spr(T^Lambda)``: ``(2 + B) / s(g)``."""
        return (2.0 + self.B) / self.scale

    def to_dict(self) -> dict:
        return {"family": self.family, "g": self.g, "B": self.B, "potential": self.potential}


@dataclass(frozen=True)
class AndersonHermitian:
    """The Hermitian Anderson model ``H(0)``, not rescaled."""

    B: float
    potential: str = "uniform"

    family: ClassVar[str] = "anderson"
    bandwidth: ClassVar[int] = 1
    cell_size: ClassVar[int] = 1

    def __post_init__(self):
        if not self.B > 0:
            raise ModelError(f"B must be positive, got {self.B}")
        _check_dist(self.potential, _POTENTIAL_DISTS)

    def to_dict(self) -> dict:
        return {"family": self.family, "B": self.B, "potential": self.potential}


@dataclass(frozen=True)
class NonUnitaryBand:
    """Random-phase band matrix with coupling ``scale * [[alpha, beta], [gamma, delta]]``."""

    alpha: complex
    beta: complex
    gamma: complex
    delta: complex
    phases: str = "uniform"
    scale: float = 1.0

    family: ClassVar[str] = "band"
    bandwidth: ClassVar[int] = 2
    cell_size: ClassVar[int] = 2

    def __post_init__(self):
        if not 0 < self.scale <= 1:
            raise ModelError(f"scale must lie in (0, 1], got {self.scale}")
        _check_dist(self.phases, _PHASE_DISTS)
        norm = np.linalg.norm(self.coupling, 2)
        if norm > 1 + 1e-12:
            raise ModelError(f"||C0|| = {norm:.6g} exceeds 1")

    @classmethod
    def diagonal(cls, g: float, phases: str = "uniform") -> "NonUnitaryBand":
        """``C0 = diag(1, g)``, the case with a closed-form spectrum."""
        return cls(1.0, 0.0, 0.0, g, phases=phases)

    @property
    def coupling(self) -> np.ndarray:
        c = np.array([[self.alpha, self.beta], [self.gamma, self.delta]], dtype=complex)
        return self.scale * c

    @property
    def is_cnu(self) -> bool:
        c = self.coupling
        return abs(np.linalg.det(c)) < 1 and abs(c[0, 0]) < 1 and abs(c[1, 1]) < 1

    def to_dict(self) -> dict:
        return {"family": self.family,
                "alpha": _complex_json(self.alpha), "beta": _complex_json(self.beta),
                "gamma": _complex_json(self.gamma), "delta": _complex_json(self.delta),
                "phases": self.phases, "scale": self.scale}


@dataclass(frozen=True)
class ScaledUnitaryBand:
    """Band matrix with ``C0 = r * rotation(theta0)``; ``r * U`` with ``U`` unitary."""

    r: float
    theta0: float
    phases: str = "uniform"

    family: ClassVar[str] = "scaled_unitary"
    bandwidth: ClassVar[int] = 2
    cell_size: ClassVar[int] = 2

    def __post_init__(self):
        if not 0 < self.r <= 1:
            raise ModelError(f"r must lie in (0, 1], got {self.r}")
        _check_dist(self.phases, _PHASE_DISTS)

    @property
    def coupling(self) -> np.ndarray:
        c, s = math.cos(self.theta0), math.sin(self.theta0)
        return self.r * np.array([[c, -s], [s, c]], dtype=complex)

    def to_dict(self) -> dict:
        return {"family": self.family, "r": self.r, "theta0": self.theta0, "phases": self.phases}


ModelSpec = Union[NSA, AndersonHermitian, NonUnitaryBand, ScaledUnitaryBand]
BandSpec = Union[NonUnitaryBand, ScaledUnitaryBand]

_FAMILIES = {cls.family: cls for cls in (NSA, AndersonHermitian, NonUnitaryBand, ScaledUnitaryBand)}


def model_from_dict(data: dict) -> ModelSpec:
    """Inverse of ``spec.to_dict()``; unknown keys are rejected."""
    data = dict(data)
    family = data.pop("family", None)
    if family not in _FAMILIES:
        raise ModelError(f"unknown model family {family!r}; expected one of {sorted(_FAMILIES)}")
    cls = _FAMILIES[family]
    allowed = {f for f in cls.__dataclass_fields__}
    unknown = set(data) - allowed
    if unknown:
        raise ModelError(f"unknown keys for {family}: {sorted(unknown)}")
    if cls is NonUnitaryBand:
        for key in ("alpha", "beta", "gamma", "delta"):
            if key in data:
                data[key] = _complex_from_json(data[key])
    try:
        return cls(**data)
    except TypeError as exc:
        raise ModelError(str(exc)) from None


def _complex_json(z):
    z = complex(z)
    return z.real if z.imag == 0 else [z.real, z.imag]


def _complex_from_json(v) -> complex:
    if isinstance(v, (list, tuple)):
        if len(v) != 2:
            raise ModelError(f"complex values are [re, im] pairs, got {v!r}")
        return complex(float(v[0]), float(v[1]))
    return complex(v)


def _check_dist(name, allowed):
    if name not in allowed:
        raise ModelError(f"unknown distribution {name!r}; expected one of {allowed}")


# ---------------------------------------------------------------------------
# Disorder


@dataclass(frozen=True)
class Disorder:
    """I.i.d. site variables drawn from a counter-based generator keyed on ``(seed, site)``."""

    master_seed: int

    def uniforms(self, sites, stream: int) -> np.ndarray:
        key = int(self.master_seed) % 2**64
        out = np.empty(len(sites))
        for i, k in enumerate(np.asarray(sites, dtype=np.int64)):
            bg = np.random.Philox(key=key, counter=np.array([int(k) % 2**64, stream, 0, 0], dtype=np.uint64))
            out[i] = (bg.random_raw() >> 11) * 2.0**-53
        return out

    def potential(self, sites, B: float, dist: str = "uniform") -> np.ndarray:
        """Potential values in ``[-B, B]``."""
        if dist == "zero":
            return np.zeros(len(sites))
        u = self.uniforms(sites, _POTENTIAL_STREAM)
        if dist == "uniform":
            return B * (2.0 * u - 1.0)
        if dist == "bernoulli":
            return np.where(u < 0.5, -B, B).astype(float)
        raise ModelError(f"unknown potential distribution {dist!r}")

    def phases(self, sites, dist: str = "uniform") -> np.ndarray:
        """Phases in ``[0, 2*pi)``."""
        if dist == "zero":
            return np.zeros(len(sites))
        if dist == "uniform":
            return 2.0 * np.pi * self.uniforms(sites, _PHASE_STREAM)
        raise ModelError(f"unknown phase distribution {dist!r}")


# ---------------------------------------------------------------------------
# Finite matrices


@dataclass
class FiniteMatrix:
    """Dense matrix of ``T^Lambda_omega`` together with how it was built."""

    entries: np.ndarray
    window: LatticeWindow
    bc_tag: str
    bandwidth: int
    scale_applied: float
    spec: ModelSpec | None = None
    seed: int | None = None
    sites: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.sites is None:
            self.sites = self.window.sites

    @property
    def size(self) -> int:
        return self.entries.shape[0]

    def norm(self) -> float:
        """Largest singular value."""
        return float(np.linalg.norm(self.entries, 2))

    def is_contraction(self, slack: float = CONTRACTION_SLACK) -> bool:
        a = np.abs(self.entries)
        # Schur bound ||M||_2 <= sqrt(||M||_1 ||M||_inf) avoids the SVD in the common case.
        bound = math.sqrt(a.sum(axis=0).max() * a.sum(axis=1).max())
        if bound <= 1 + slack:
            return True
        return self.norm() <= 1 + slack


def build_nsa(g: float, B: float, window: LatticeWindow, seed: int,
              dist: str = "uniform") -> FiniteMatrix:
    """Rescaled NSA matrix ``H^Lambda(g) / s(g)`` with Dirichlet boundary conditions."""
    return build(NSA(g, B, dist), window, seed)


def build_anderson(B: float, window: LatticeWindow, seed: int,
                   dist: str = "uniform") -> FiniteMatrix:
    """Unscaled real symmetric Anderson matrix ``H^Lambda(0)``."""
    return build(AndersonHermitian(B, dist), window, seed)


def build_band(spec: BandSpec, window: LatticeWindow, seed: int) -> FiniteMatrix:
    """Random-phase band matrix ``D_omega T^Lambda`` on an even window."""
    return build(spec, window, seed)


def build(spec: ModelSpec, window: LatticeWindow, seed: int) -> FiniteMatrix:
    """Build ``T^Lambda_omega`` for any model family."""
    _check_window(spec, window)
    return matrix_on_sites(spec, window.sites, seed, window=window)


def matrix_on_sites(spec: ModelSpec, sites: np.ndarray, seed: int,
                    window: LatticeWindow | None = None) -> FiniteMatrix:
    """Build the model on an explicit run of consecutive sites.

    Used directly for padded windows, where ``window`` is the inner window
    whose trace is of interest.
    """
    sites = np.asarray(sites, dtype=np.int64)
    disorder = Disorder(seed)
    if isinstance(spec, (NSA, AndersonHermitian)):
        g = spec.g if isinstance(spec, NSA) else 0.0
        scale = spec.scale if isinstance(spec, NSA) else 1.0
        omega = disorder.potential(sites, spec.B, spec.potential)
        entries = _tridiagonal(omega, math.exp(-g), math.exp(g)) / scale
        bc, scale_applied = "dirichlet", 1.0 / scale
    elif isinstance(spec, (NonUnitaryBand, ScaledUnitaryBand)):
        omega = disorder.phases(sites, spec.phases)
        entries = _band_cycle(spec.coupling, sites)
        entries *= np.exp(1j * omega)[:, None]
        bc = "periodic"
        scale_applied = spec.scale if isinstance(spec, NonUnitaryBand) else spec.r
    else:
        raise ModelError(f"unsupported model {spec!r}")
    if window is None:
        window = LatticeWindow(0, len(sites), anchored=True)
    return FiniteMatrix(entries, window, bc, spec.bandwidth, scale_applied,
                        spec=spec, seed=seed, sites=sites)


def _check_window(spec, window):
    if isinstance(spec, (NSA, AndersonHermitian)):
        if window.cell_size != 1:
            raise ModelError("NSA/Anderson models need cell_size = 1")
        if not window.anchored and window.half_width == 0:
            raise ModelError("window half_width must be >= 1 (n = 0 degenerates the spectrum)")
    else:
        if window.size % 2 or window.first_site % 2 == 0:
            raise ModelError("band models need an even window starting on an odd site")


def _tridiagonal(diag, lower, upper):
    n = len(diag)
    m = np.diag(np.asarray(diag, dtype=float))
    idx = np.arange(n - 1)
    m[idx + 1, idx] = lower
    m[idx, idx + 1] = upper
    return m


def _band_cycle(c0, sites):
    """Deterministic band matrix (all phases zero) on ``sites``.

    Each column pair ``(2m, 2m+1)`` is sent by ``C0`` to the rows
    ``(2m+2, 2m-1)``. The pair formed by the first and last sites closes the
    chain, feeding rows ``first+1`` and ``last-1``. For ``C0 = diag(1, g)`` the
    result is a single weighted cycle through all sites.
    """
    n = len(sites)
    first = int(sites[0])
    if n % 2 or first % 2 == 0:
        raise ModelError("band models need an even number of sites starting on an odd site")
    (alpha, beta), (gamma, delta) = c0
    m = np.zeros((n, n), dtype=complex)
    for e in range(1, n - 2, 2):  # local index of even sites with an interior pair
        m[e + 2, e] = alpha
        m[e + 2, e + 1] = beta
        m[e - 1, e] = gamma
        m[e - 1, e + 1] = delta
    last = n - 1
    m[1, 0] = alpha
    m[1, last] = beta
    m[last - 1, 0] = gamma
    m[last - 1, last] = delta
    return m


# ---------------------------------------------------------------------------
# Reference objects for the NSA model


@dataclass(frozen=True)
class ReferenceRegion:
    """The set ``(E_g + [-B, B]) / s(g)`` with ``E_g`` the ellipse ``e^{g+i t} + e^{-g-i t}``."""

    g: float
    B: float
    curves: tuple

    @property
    def scale(self) -> float:
        return math.exp(self.g) + math.exp(-self.g) + self.B

    def contains(self, z, tol: float = 1e-8) -> np.ndarray:
        z = np.asarray(z, dtype=complex) * self.scale
        a = math.exp(self.g) + math.exp(-self.g)
        b = math.exp(self.g) - math.exp(-self.g)
        tol = tol * self.scale
        x, y = np.abs(z.real), np.abs(z.imag)
        if b == 0:
            return (y <= tol) & (x <= a + self.B + tol)
        x0 = a * np.sqrt(np.clip(1.0 - (np.minimum(y, b) / b) ** 2, 0.0, None))
        inside = (np.abs(x - x0) <= self.B + tol) | (x + x0 <= self.B + tol)
        return inside & (y <= b + tol)


def nsa_reference_region(g: float, B: float, samples: int = 512) -> ReferenceRegion:
    """Sampled boundary of the infinite-volume NSA spectrum, rescaled by ``s(g)``.

    The set is exactly ``E_g + [-B, B]`` as a Minkowski sum; when
    ``B < e^g + e^-g`` it has a hole and a second (inner) curve is returned.
    For ``g = 0`` the region collapses to the segment ``[-(2+B), 2+B] / s``.
    """
    if g < 0:
        raise ModelError("g must be non-negative")
    a = math.exp(g) + math.exp(-g)
    b = math.exp(g) - math.exp(-g)
    s = a + B
    if b == 0:
        seg = np.linspace(-(a + B), a + B, samples) / s
        return ReferenceRegion(g, B, (seg.astype(complex),))
    half = samples // 2
    theta = np.linspace(-np.pi / 2, np.pi / 2, half)
    right = B + a * np.cos(theta) + 1j * b * np.sin(theta)
    left = -B - a * np.cos(theta[::-1]) + 1j * b * np.sin(theta[::-1])
    outer = np.concatenate([right, left, right[:1]]) / s
    curves = [outer]
    if B < a:
        theta = np.linspace(0, 2 * np.pi, samples)
        # inner boundary: the ellipse shrunk horizontally by B, where it exists
        y = b * np.sin(theta)
        x = a * np.cos(theta)
        x = np.sign(x) * np.maximum(np.abs(x) - B, 0.0)
        curves.append((x + 1j * y) / s)
    return ReferenceRegion(g, B, tuple(curves))


def similarity_reduce(m: FiniteMatrix) -> tuple[np.ndarray, np.ndarray]:
    """Symmetric tridiagonal form of an NSA matrix under ``W phi_k = e^{kg} phi_k``.

    Returns ``(diag, offdiag)``: the diagonal ``omega_j / s(g)`` and the
    geometric mean of the hoppings, ``1 / s(g)``.
    """
    if not isinstance(m.spec, (NSA, AndersonHermitian)) or m.bc_tag != "dirichlet":
        raise ModelError("similarity_reduce needs an NSA (or Anderson) matrix with Dirichlet bc")
    t = m.entries
    diag = np.real(np.diag(t)).copy()
    prod = np.real(np.diag(t, -1) * np.diag(t, 1))
    offdiag = np.sqrt(np.clip(prod, 0.0, None))
    return diag, offdiag
