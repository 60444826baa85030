"""Fourier multipliers on the torus: the discrete sphere symbol and its major-arc approximants.

Conventions: e(x) = exp(2 pi i x); the transform of a kernel K on Z^d is
sum_n K(n) e(-n . xi).  The continuous sphere transform is normalized to unit
mass, sigma(0) = 1.  psi_s(eta) means psi(s * eta).
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import roots_jacobi

from .arithmetic import gauss_factors, gauss_values
from .errors import CapacityError, ToleranceError
from .lattice import enumerate_sphere

log = logging.getLogger(__name__)

QUADRATURE_TOL = 1e-12
GRID_CAP = 2**24
BASE, NARROW, ENDPOINT, REMAINDER = "base", "narrow", "endpoint", "remainder"
VARIANTS = (BASE, NARROW, ENDPOINT, REMAINDER)


# ---------------------------------------------------------------------------
# bump profile and torus grid
# ---------------------------------------------------------------------------

_RAMPS = {
    1: lambda t: t * t * (3 - 2 * t),
    2: lambda t: t**3 * (10 - 15 * t + 6 * t * t),
    3: lambda t: t**4 * (35 - 84 * t + 70 * t * t - 20 * t**3),
}


@dataclass(frozen=True)
class BumpProfile:
    """Radial cutoff: 1 on |xi| <= 1/2, a polynomial ramp on [1/2, 1], 0 beyond.

    ``order`` k gives a C^k ramp (1: cubic, 2: quintic, 3: septic).
    """

    order: int = 2

    def __post_init__(self):
        if self.order not in _RAMPS:
            raise ValueError(f"unsupported smoothness order {self.order}")

    def radial(self, r) -> np.ndarray:
        t = np.clip(2.0 * np.asarray(r, dtype=np.float64) - 1.0, 0.0, 1.0)
        return 1.0 - _RAMPS[self.order](t)

    def __call__(self, xi) -> np.ndarray:
        xi = np.asarray(xi, dtype=np.float64)
        return self.radial(np.linalg.norm(xi, axis=-1))


@dataclass(frozen=True)
class TorusGrid:
    """Sample points k / resolution of the torus, reduced to [-1/2, 1/2).

    Only the coordinates listed in ``axes`` vary; the rest are held at 0, so a
    two-element ``axes`` is a 2-plane slice through the origin.
    """

    dimension: int
    resolution: int
    axes: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.resolution < 1:
            raise ValueError("resolution must be positive")
        axes = tuple(range(self.dimension)) if self.axes is None else tuple(self.axes)
        if len(set(axes)) != len(axes) or any(not 0 <= a < self.dimension for a in axes):
            raise ValueError("invalid slice axes")
        object.__setattr__(self, "axes", axes)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.resolution,) * len(self.axes)

    @property
    def size(self) -> int:
        return self.resolution ** len(self.axes)

    def coordinates(self) -> np.ndarray:
        k = np.arange(self.resolution)
        xi = k / self.resolution
        return np.where(xi >= 0.5, xi - 1.0, xi)

    def points(self) -> np.ndarray:
        if self.size > GRID_CAP:
            raise CapacityError(f"grid of {self.size} points exceeds cap {GRID_CAP}")
        c = self.coordinates()
        mesh = np.meshgrid(*([c] * len(self.axes)), indexing="ij")
        out = np.zeros((self.size, self.dimension))
        for j, axis in enumerate(self.axes):
            out[:, axis] = mesh[j].reshape(-1)
        return out


@dataclass(frozen=True, eq=False)
class MultiplierSample:
    grid: TorusGrid
    values: np.ndarray  # shape grid.shape, index k <-> xi = k / resolution
    label: str

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))

    def __sub__(self, other: "MultiplierSample") -> "MultiplierSample":
        if other.grid != self.grid:
            raise ValueError("samples live on different grids")
        return MultiplierSample(self.grid, self.values - other.values, f"{self.label}-{other.label}")


# ---------------------------------------------------------------------------
# continuous sphere transform
# ---------------------------------------------------------------------------

@lru_cache(maxsize=256)
def _jacobi_rule(d: int, n: int) -> tuple[np.ndarray, np.ndarray]:
    alpha = (d - 3) / 2.0
    t, w = roots_jacobi(n, alpha, alpha)
    return t, w / w.sum()


def _quadrature(d: int, r: np.ndarray, n: int) -> np.ndarray:
    t, w = _jacobi_rule(d, n)
    out = np.empty(r.shape)
    step = max(1, 2**22 // n)
    flat = r.reshape(-1)
    res = out.reshape(-1)
    for s in range(0, len(flat), step):
        res[s : s + step] = np.cos(2 * np.pi * np.outer(flat[s : s + step], t)) @ w
    return out


def sphere_ft_radial(d: int, r) -> np.ndarray:
    """Unit-mass sphere transform in R^d at radial frequency r (vectorized).

    Integrates cos(2 pi r t) against (1 - t^2)^((d-3)/2) with Gauss-Jacobi
    nodes, doubling the node count until two successive rules agree.
    """
    if d < 2:
        raise ValueError("need d >= 2")
    r = np.abs(np.asarray(r, dtype=np.float64))
    if r.size == 0:
        return r.copy()
    n = 16 + int(2 * np.pi * float(r.max()))
    prev = _quadrature(d, r, n)
    while n < 1 << 16:
        n *= 2
        cur = _quadrature(d, r, n)
        if np.max(np.abs(cur - prev)) < QUADRATURE_TOL:
            return cur
        prev = cur
    raise ToleranceError("sphere transform quadrature did not converge")


def continuous_sphere_ft(d: int, lam: float, xi) -> complex:
    """Unit-mass sphere transform at radius ``lam`` and frequency vector ``xi``."""
    r = lam * float(np.linalg.norm(np.atleast_1d(np.asarray(xi, dtype=np.float64))))
    return complex(sphere_ft_radial(d, np.array([r]))[0])


class SphereFTTable:
    """Cubic-spline table of the radial sphere transform on [0, r_max]."""

    def __init__(self, d: int, r_max: float, step: float = 1e-3):
        self.d = d
        self.r_max = float(r_max)
        nodes = np.linspace(0.0, self.r_max, max(16, int(math.ceil(self.r_max / step)) + 1))
        self._spline = CubicSpline(nodes, sphere_ft_radial(d, nodes), bc_type=((1, 0.0), "not-a-knot"))

    def __call__(self, r) -> np.ndarray:
        r = np.abs(np.asarray(r, dtype=np.float64))
        if r.size and r.max() > self.r_max * (1 + 1e-12):
            return sphere_ft_radial(self.d, r)
        return self._spline(r)


def sphere_ft_decay_constant(d: int, r_lo: float = 8.0, r_hi: float = 16.0, samples: int = 4001) -> float:
    """max over r in [r_lo, r_hi] of |sigma(r)| r^((d-1)/2)."""
    r = np.linspace(r_lo, r_hi, samples)
    return float(np.max(np.abs(sphere_ft_radial(d, r)) * r ** ((d - 1) / 2)))


def sphere_mass(d: int) -> float:
    """pi^(d/2) / Gamma(d/2): the mean of lambda^(2-d) r_d(lambda^2), i.e. the discrete shell mass."""
    return math.pi ** (d / 2) / math.gamma(d / 2)


# ---------------------------------------------------------------------------
# discrete sphere multiplier
# ---------------------------------------------------------------------------

def discrete_sphere_multiplier(d: int, lambda_sq: int, grid: TorusGrid) -> MultiplierSample:
    """lambda^(2-d) sum over the shell of e(-n . xi) at every grid point.

    Shell points are folded modulo the grid (exact, since e(-n . k / G) only
    depends on n mod G) and transformed with an FFT.
    """
    if grid.dimension != d:
        raise ValueError("grid dimension mismatch")
    if grid.size > GRID_CAP:
        raise CapacityError(f"grid of {grid.size} points exceeds cap {GRID_CAP}")
    shell = enumerate_sphere(d, lambda_sq)
    G = grid.resolution
    folded = np.mod(shell.points[:, list(grid.axes)], G)
    hist = np.zeros(grid.shape)
    np.add.at(hist, tuple(folded.T), 1.0)
    values = np.fft.fftn(hist) * float(lambda_sq) ** ((2 - d) / 2)
    return MultiplierSample(grid, values, f"a[{lambda_sq}]")


def discrete_sphere_values(d: int, lambda_sq: int, xis) -> np.ndarray:
    """Direct-summation values of the discrete sphere multiplier at arbitrary points."""
    shell = enumerate_sphere(d, lambda_sq).points.astype(np.float64)
    xis = np.atleast_2d(np.asarray(xis, dtype=np.float64))
    phase = xis @ shell.T
    return np.exp(-2j * np.pi * phase).sum(axis=1) * float(lambda_sq) ** ((2 - d) / 2)


# ---------------------------------------------------------------------------
# major arcs
# ---------------------------------------------------------------------------

def lattice_candidates(xis: np.ndarray, q: int, radius: float):
    """All (point index, l in Z^d) with |xi - l/q| <= radius, plus the offsets xi - l/q.

    Coordinates are expanded one axis at a time and pruned on the partial norm.
    """
    xis = np.atleast_2d(np.asarray(xis, dtype=np.float64))
    P, d = xis.shape
    idx = np.arange(P)
    ells = np.zeros((P, 0), dtype=np.int64)
    part = np.zeros(P)
    r2 = radius * radius * (1 + 1e-12)
    for axis in range(d):
        x = xis[idx, axis]
        lo = np.ceil(q * (x - radius) - 1e-12).astype(np.int64)
        hi = np.floor(q * (x + radius) + 1e-12).astype(np.int64)
        cnt = np.maximum(hi - lo + 1, 0)
        rep = np.repeat(np.arange(len(idx)), cnt)
        start = np.cumsum(cnt) - cnt
        ell = lo[rep] + (np.arange(len(rep)) - start[rep])
        new_part = part[rep] + (xis[idx[rep], axis] - ell / q) ** 2
        keep = new_part <= r2
        rep, ell, new_part = rep[keep], ell[keep], new_part[keep]
        idx = idx[rep]
        ells = np.concatenate([ells[rep], ell[:, None]], axis=1)
        part = new_part
    eta = xis[idx] - ells / q
    return idx, ells, eta


def _cutoff(variant: str, psi: BumpProfile, eta_norm, q: int, lam: float, N, Q) -> np.ndarray:
    if variant == BASE:
        return psi.radial(q * eta_norm)
    if variant == NARROW:
        return psi.radial(q * eta_norm) * psi.radial(lam * Q / N * eta_norm)
    if variant == REMAINDER:
        return psi.radial(q * eta_norm) * (1.0 - psi.radial(lam * Q / N * eta_norm))
    if variant == ENDPOINT:
        return psi.radial(lam * q / N * eta_norm)
    raise ValueError(f"unknown variant {variant!r}")


def _support_radius(variant: str, q: int, lam: float, N, Q) -> float:
    if variant in (BASE, REMAINDER):
        return 1.0 / q
    if variant == NARROW:
        return min(1.0 / q, N / (lam * Q))
    return N / (lam * q)


def _check_variant(variant, N, Q):
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    if variant in (NARROW, REMAINDER) and (N is None or Q is None):
        raise ValueError(f"variant {variant} needs N and Q")
    if variant == ENDPOINT and N is None:
        raise ValueError("endpoint variant needs N")


def major_arc_values(d: int, lambda_sq: int, a: int, q: int, xis, variant: str = BASE,
                     psi: BumpProfile | None = None, N=None, Q=None, gauss: bool = True,
                     sphere=None) -> np.ndarray:
    """sum over l in Z^d of G(a/q, l) cut(xi - l/q) sigma_lambda(xi - l/q), vectorized in xi.

    ``gauss=False`` drops the Gauss weights (the Gauss-free factor).
    """
    if math.gcd(a, q) != 1:
        raise ValueError(f"gcd({a}, {q}) != 1")
    _check_variant(variant, N, Q)
    psi = psi or BumpProfile()
    lam = math.sqrt(lambda_sq)
    xis = np.atleast_2d(np.asarray(xis, dtype=np.float64))
    idx, ells, eta = lattice_candidates(xis, q, _support_radius(variant, q, lam, N, Q))
    norm = np.linalg.norm(eta, axis=1)
    sig = sphere(lam * norm) if sphere is not None else sphere_ft_radial(d, lam * norm)
    term = _cutoff(variant, psi, norm, q, lam, N, Q) * sig
    if gauss:
        term = term * gauss_values(a, q, ells)
    out = np.zeros(len(xis), dtype=np.complex128)
    np.add.at(out, idx, term)
    return out


def major_arc_multiplier(d: int, lambda_sq: int, a: int, q: int, xi, variant: str = BASE,
                         psi: BumpProfile | None = None, N=None, Q=None) -> complex:
    return complex(major_arc_values(d, lambda_sq, a, q, np.asarray(xi)[None], variant, psi, N, Q)[0])


def units(q: int) -> list[int]:
    return [a for a in range(q) if math.gcd(a, q) == 1]


def main_term_values(d: int, lambda_sq: int, xis, q_max: int, psi: BumpProfile | None = None,
                     mass: float = 1.0, sphere=None, q_range=None) -> np.ndarray:
    """sum_{q <= q_max} sum_a e_q(-lambda^2 a) c^{a/q}(xi), times ``mass``.

    The cutoff and sphere factors do not depend on a, so the a-sum is folded
    into a single weight per candidate l.
    """
    psi = psi or BumpProfile()
    lam = math.sqrt(lambda_sq)
    if q_max > lam + 1e-12:
        raise ValueError("q_max must not exceed lambda")
    xis = np.atleast_2d(np.asarray(xis, dtype=np.float64))
    out = np.zeros(len(xis), dtype=np.complex128)
    qs = range(1, q_max + 1) if q_range is None else q_range
    for q in qs:
        idx, ells, eta = lattice_candidates(xis, q, 1.0 / q)
        if len(idx) == 0:
            continue
        norm = np.linalg.norm(eta, axis=1)
        sig = sphere(lam * norm) if sphere is not None else sphere_ft_radial(d, lam * norm)
        term = psi.radial(q * norm) * sig
        us = units(q)
        F = np.stack([gauss_factors(a, q) for a in us])  # (A, q)
        tw = np.exp(-2j * np.pi * ((lambda_sq * np.array(us)) % q) / q)
        g = np.ones((len(us), len(idx)), dtype=np.complex128)
        for axis in range(d):
            g *= F[:, np.mod(ells[:, axis], q)]
        np.add.at(out, idx, term * (tw @ g))
    return mass * out


def main_term_multiplier(d: int, lambda_sq: int, xi, q_max: int, psi: BumpProfile | None = None,
                         mass: float = 1.0) -> complex:
    return complex(main_term_values(d, lambda_sq, np.asarray(xi)[None], q_max, psi, mass)[0])


# ---------------------------------------------------------------------------
# error multiplier and factorization
# ---------------------------------------------------------------------------

@dataclass
class ErrorDecayReport:
    dimension: int
    lambda_sq: list[int]
    resolution: list[int]
    q_max: list[int]
    sup_error: list[float]
    sup_discrete: list[float]
    slope: float
    mass: float
    axes: tuple[int, ...]
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["axes"] = list(self.axes)
        return out


def floor_sqrt_rule(lambda_sq: int) -> int:
    return math.isqrt(lambda_sq)


def error_multiplier_sample(d: int, lambda_sq: int, grid: TorusGrid, q_max: int,
                            psi: BumpProfile | None = None, mass: float | None = None) -> MultiplierSample:
    """a_lambda - mass * c_lambda on the grid (mass defaults to the discrete shell mass)."""
    mass = sphere_mass(d) if mass is None else mass
    disc = discrete_sphere_multiplier(d, lambda_sq, grid)
    table = SphereFTTable(d, math.sqrt(lambda_sq) * 1.01 * math.sqrt(d))
    main = main_term_values(d, lambda_sq, grid.points(), q_max, psi, mass, sphere=table)
    return MultiplierSample(grid, disc.values - main.reshape(grid.shape), f"e[{lambda_sq}]")


def error_multiplier_norm(d: int, lambda_sq_list, resolution=None, axes=(0, 1), q_max_rule=floor_sqrt_rule,
                          psi: BumpProfile | None = None, mass: float | None = None,
                          oversample: float = 4.0) -> ErrorDecayReport:
    """Grid sup of the error multiplier per radius and its log-log slope against lambda."""
    mass = sphere_mass(d) if mass is None else mass
    lams, res_list, qs, sups, discs, warns = [], [], [], [], [], []
    for m in lambda_sq_list:
        lam = math.sqrt(m)
        G = int(resolution) if resolution is not None else int(math.ceil(oversample * lam))
        if G < 2 * lam:
            msg = f"resolution {G} < 2*lambda = {2 * lam:.2f} at lambda^2 = {m}: shell sum is undersampled"
            log.warning(msg)
            warns.append(msg)
        grid = TorusGrid(d, G, axes)
        q_max = q_max_rule(m)
        err = error_multiplier_sample(d, m, grid, q_max, psi, mass)
        lams.append(int(m))
        res_list.append(G)
        qs.append(q_max)
        sups.append(err.sup())
        discs.append(float(np.max(np.abs(discrete_sphere_multiplier(d, m, grid).values))))
    if len(lams) >= 2:
        slope = float(np.polyfit(0.5 * np.log(lams), np.log(sups), 1)[0])
    else:
        slope = float("nan")
    return ErrorDecayReport(d, lams, res_list, qs, sups, discs, slope, mass, tuple(axes), warns)


def gauss_bump_values(a: int, q: int, xis, scale: float, psi: BumpProfile | None = None) -> np.ndarray:
    """sum over l in Z^d of G(a/q, l) psi(scale * (xi - l/q)), vectorized."""
    psi = psi or BumpProfile()
    xis = np.atleast_2d(np.asarray(xis, dtype=np.float64))
    idx, ells, eta = lattice_candidates(xis, q, 1.0 / scale)
    term = psi.radial(scale * np.linalg.norm(eta, axis=1)) * gauss_values(a, q, ells)
    out = np.zeros(len(xis), dtype=np.complex128)
    np.add.at(out, idx, term)
    return out


@dataclass(frozen=True)
class FactorizationResult:
    lhs: complex
    rhs: complex
    residual: float


def factorization_check(d: int, lambda_sq: int, a: int, q: int, Q: int, N: int, xi,
                        psi: BumpProfile | None = None) -> FactorizationResult:
    """Compare (base - narrow) against (Gauss-weighted psi_{Q/2} bump sum) x (Gauss-free remainder)."""
    if not Q <= q < 2 * Q:
        raise ValueError("need Q <= q < 2Q")
    xis = np.asarray(xi, dtype=np.float64)[None]
    lhs = (major_arc_values(d, lambda_sq, a, q, xis, BASE, psi)
           - major_arc_values(d, lambda_sq, a, q, xis, NARROW, psi, N, Q))[0]
    bump = gauss_bump_values(a, q, xis, Q / 2.0, psi)[0]
    rest = major_arc_values(d, lambda_sq, a, q, xis, REMAINDER, psi, N, Q, gauss=False)[0]
    rhs = bump * rest
    return FactorizationResult(complex(lhs), complex(rhs), float(abs(lhs - rhs)))
