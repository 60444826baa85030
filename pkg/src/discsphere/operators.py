"""Discrete spherical, ball and annulus averages, the maximal operator and stopping times.

The spherical average at squared radius m = lambda^2 is

    A f(x) = lambda^(2-d) * sum_{|n|^2 = m} f(x - n),

normalized by the decay rate of the shell size rather than by its exact
cardinality.  Functions are zero outside their box; outputs live on a box that
defaults to the input box.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import _kernels
from .dyadic import DyadicCube, dense_cube_scan, stopping_cube_scan
from .errors import CapacityError, EmptyAnnulusError
from .lattice import (
    BoxDomain,
    LatticeFunction,
    RadiusSet,
    enumerate_ball,
    enumerate_sphere,
    representation_counts,
)

log = logging.getLogger(__name__)

WORK_CAP = 2**36
DENSITY = "density"
PRESPARSE = "presparse"


def _dimension_gate(d: int) -> None:
    if d < 5:
        log.warning("dimension %d < 5: averages are computed but the sphere-size asymptotics do not apply", d)


def _out_box(f: LatticeFunction, out_box: BoxDomain | None) -> BoxDomain:
    box = f.domain if out_box is None else out_box
    if box.dimension != f.dimension:
        raise ValueError("output box dimension differs from the input")
    return box


def _offset_average(f: LatticeFunction, xs: np.ndarray, offsets: np.ndarray, weight: float,
                    cap: int = WORK_CAP) -> np.ndarray:
    if len(offsets) * len(xs) > cap:
        raise CapacityError(f"{len(offsets)} offsets x {len(xs)} points exceeds work cap {cap}")
    wk = np.full(len(offsets), float(weight))
    return _kernels.offset_sum(
        np.ascontiguousarray(f.values.reshape(-1)),
        np.asarray(f.domain.corner, dtype=np.int64),
        f.domain.side,
        np.ascontiguousarray(xs, dtype=np.int64),
        np.ascontiguousarray(offsets, dtype=np.int64),
        wk,
    )


def sphere_weight(d: int, m: int) -> float:
    """lambda^(2-d) for lambda^2 = m."""
    return float(m) ** ((2 - d) / 2)


def spherical_average(f: LatticeFunction, lambda_sq: int, out_box: BoxDomain | None = None,
                      cap: int = WORK_CAP) -> LatticeFunction:
    if lambda_sq < 1 or int(lambda_sq) != lambda_sq:
        raise ValueError("lambda_sq must be an integer >= 1")
    d = f.dimension
    _dimension_gate(d)
    box = _out_box(f, out_box)
    shell = enumerate_sphere(d, int(lambda_sq))
    vals = _offset_average(f, box.points(), shell.points, sphere_weight(d, lambda_sq), cap)
    return LatticeFunction(box, vals.reshape(box.shape))


def ball_average(f: LatticeFunction, radius: float, out_box: BoxDomain | None = None,
                 cap: int = WORK_CAP) -> LatticeFunction:
    """Average of f over {n : |n| <= radius}, normalized by the exact point count."""
    box = _out_box(f, out_box)
    pts = enumerate_ball(f.dimension, radius)
    vals = _offset_average(f, box.points(), pts, 1.0 / len(pts), cap)
    return LatticeFunction(box, vals.reshape(box.shape))


def annulus_points(d: int, radius: float, width: float) -> np.ndarray:
    """Lattice points n with 0 <= radius - |n| < width, decided in exact arithmetic."""
    if radius <= 0 or width <= 0:
        raise ValueError("need radius > 0 and width > 0")
    # |n|^2 is an integer, so comparisons against floors of the exact bounds are exact
    outer = math.floor(Fraction(radius) ** 2)
    inner = Fraction(radius) - Fraction(width)
    ball = enumerate_ball(d, radius)
    norms = (ball.astype(np.int64) ** 2).sum(axis=1)
    keep = norms <= outer
    if inner >= 0:
        keep &= norms > math.floor(inner * inner)
    pts = ball[keep]
    if len(pts) == 0:
        raise EmptyAnnulusError(f"no lattice points with {float(inner)} < |n| <= {radius}")
    return pts


def annulus_average(f: LatticeFunction, radius: float, width: float, out_box: BoxDomain | None = None,
                    cap: int = WORK_CAP) -> LatticeFunction:
    """Average of f over the annulus of outer radius ``radius`` and the given width."""
    box = _out_box(f, out_box)
    pts = annulus_points(f.dimension, radius, width)
    vals = _offset_average(f, box.points(), pts, 1.0 / len(pts), cap)
    return LatticeFunction(box, vals.reshape(box.shape))


@dataclass(frozen=True, eq=False)
class AverageResult:
    output: LatticeFunction
    radius_meta: np.ndarray | None = None  # squared radius attaining the supremum


def _engine_cost(f: LatticeFunction, n: int, m_max: int) -> float:
    nnz = int(np.count_nonzero(f.values))
    d = f.dimension
    reach = min(f.domain.side, 2 * math.isqrt(m_max) + 1)
    U = reach ** (d // 2)
    return n * min(nnz, U * (m_max + 1) / 4 + nnz / max(1, reach ** (d // 2)))


def shell_maximum(f: LatticeFunction, xs: np.ndarray, radii: RadiusSet,
                  lo=None, hi=None) -> tuple[np.ndarray, np.ndarray]:
    """sup over allowed m in [lo(x), hi(x)] of A_m f(x), with the smallest attaining m."""
    d = f.dimension
    xs = np.asarray(xs, dtype=np.int64).reshape(-1, d)
    m_max = radii.max_sq
    lo = np.zeros(len(xs), dtype=np.int64) if lo is None else np.broadcast_to(lo, (len(xs),))
    hi = np.full(len(xs), m_max, dtype=np.int64) if hi is None else np.broadcast_to(hi, (len(xs),))
    allowed = radii.mask(m_max)
    w = np.zeros(m_max + 1)
    w[1:] = np.arange(1, m_max + 1, dtype=np.float64) ** ((2 - d) / 2)

    counts = np.array(representation_counts(d, m_max))[: m_max + 1]
    offset_cost = len(xs) * float(counts[allowed].sum())
    if offset_cost <= _engine_cost(f, len(xs), m_max):
        best = np.full(len(xs), -np.inf)
        arg = np.full(len(xs), -1, dtype=np.int64)
        for m in radii:
            inside = (lo <= m) & (m <= hi)
            if not inside.any():
                continue
            vals = np.full(len(xs), -np.inf)
            vals[inside] = _offset_average(f, xs[inside], enumerate_sphere(d, m).points, w[m])
            better = vals > best
            best[better] = vals[better]
            arg[better] = m
        best[arg < 0] = 0.0
        return best, arg
    return _kernels.shell_reduce(f.values, f.domain.corner, xs, m_max, w, allowed, lo, hi,
                                 _kernels.MODE_MAX)


def maximal_average(f: LatticeFunction, radii: RadiusSet, out_box: BoxDomain | None = None) -> AverageResult:
    """Pointwise sup of the spherical averages over ``radii`` (ties go to the smallest radius)."""
    _dimension_gate(f.dimension)
    box = _out_box(f, out_box)
    vals, arg = shell_maximum(f, box.points(), radii)
    return AverageResult(LatticeFunction(box, vals.reshape(box.shape)), arg.reshape(box.shape))


# ---------------------------------------------------------------------------
# stopping times
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class StoppingTime:
    """Per-point squared radius tau(x)^2 on a box, tagged with its admissibility mode."""

    domain: BoxDomain
    tau_sq: np.ndarray
    mode: str = DENSITY

    def __post_init__(self):
        t = np.array(self.tau_sq, dtype=np.int64)
        if t.shape != self.domain.shape:
            raise ValueError("tau shape does not match its domain")
        if np.any(t < 1):
            raise ValueError("tau^2 must be >= 1 everywhere")
        if self.mode not in (DENSITY, PRESPARSE):
            raise ValueError(f"unknown admissibility mode {self.mode!r}")
        t.flags.writeable = False
        object.__setattr__(self, "tau_sq", t)

    @classmethod
    def constant(cls, domain: BoxDomain, lambda_sq: int, mode: str = DENSITY) -> "StoppingTime":
        return cls(domain, np.full(domain.shape, int(lambda_sq)), mode)

    @classmethod
    def from_radii(cls, domain: BoxDomain, tau, mode: str = DENSITY, radii: RadiusSet | None = None) -> "StoppingTime":
        """Snap real radii down to admissible squared radii (integers, or members of ``radii``)."""
        tau = np.asarray(tau, dtype=np.float64)
        sq = np.floor(tau * tau + 1e-9).astype(np.int64)
        snapped = int(np.count_nonzero(np.abs(sq - tau * tau) > 1e-9))
        if radii is not None:
            entries = np.array(radii.entries)
            pos = np.searchsorted(entries, sq, side="right") - 1
            if np.any(pos < 0):
                raise ValueError("some tau lies below the smallest admissible radius")
            new = entries[pos]
            snapped += int(np.count_nonzero(new != sq))
            sq = new
        if snapped:
            log.info("snapped %d stopping-time values down to admissible squared radii", snapped)
        return cls(domain, sq, mode)

    @property
    def tau(self) -> np.ndarray:
        return np.sqrt(self.tau_sq)


def stopping_time_average(f: LatticeFunction, tau: StoppingTime, radii: RadiusSet | None = None) -> LatticeFunction:
    """(A_{tau(x)} f)(x) on the domain of ``tau``.

    With ``radii`` given, values of tau^2 outside the set snap down to the
    nearest member (logged).
    """
    box = tau.domain
    d = f.dimension
    t = tau.tau_sq.reshape(-1)
    if radii is not None:
        entries = np.array(radii.entries)
        pos = np.searchsorted(entries, t, side="right") - 1
        if np.any(pos < 0):
            raise ValueError("some tau lies below the smallest admissible radius")
        snapped = entries[pos]
        if np.any(snapped != t):
            log.info("snapped %d stopping-time values down to the radius set", int(np.count_nonzero(snapped != t)))
        t = snapped
    xs = box.points()
    out = np.zeros(len(xs))
    for m in np.unique(t):
        sel = t == m
        out[sel] = _offset_average(f, xs[sel], enumerate_sphere(d, int(m)).points, sphere_weight(d, int(m)))
    return LatticeFunction(box, out.reshape(box.shape))


def _as_cube(E) -> DyadicCube:
    return E if isinstance(E, DyadicCube) else DyadicCube.from_box(E)


def in_third(cube: DyadicCube, pts: np.ndarray) -> np.ndarray:
    """Points whose unit cell centre lies in the concentric cube of one third the side."""
    pts = np.asarray(pts, dtype=np.int64)
    dev = np.abs(2 * pts + 1 - 2 * cube.lower - cube.side)
    return np.all(3 * dev <= cube.side, axis=-1)


def _density_floor(f: LatticeFunction, E: DyadicCube, C: float) -> np.ndarray:
    """Smallest admissible tau^2 under the density rule: l(Q)^2 + 1 on the largest dense Q."""
    floor = np.ones((E.side,) * E.dimension, dtype=np.int64)
    for level, corners in sorted(dense_cube_scan(f, E, C).items()):
        side = 1 << level
        for c in corners:
            sl = tuple(slice(int(v), int(v) + side) for v in c - E.lower)
            np.maximum(floor[sl], side * side + 1, out=floor[sl])
    return floor


def _presparse_floor(E: DyadicCube, family) -> np.ndarray:
    """Smallest admissible tau^2 under the pre-sparse rule: max(1, l(Q)^2 1_{Q/3})."""
    floor = np.ones((E.side,) * E.dimension, dtype=np.int64)
    pts = E.box.points()
    flat = floor.reshape(-1)
    for Q in family:
        inside = in_third(Q, pts)
        flat[inside] = np.maximum(flat[inside], Q.side * Q.side)
    return floor


def make_admissible_tau(f: LatticeFunction, E, C: float, mode: str = DENSITY,
                        extreme: str = "max", family=None) -> StoppingTime:
    """An admissible stopping time on the dyadic cube E.

    ``extreme="max"`` returns the largest admissible choice, tau = l(E).
    ``extreme="min"`` returns the pointwise smallest admissible choice: under the
    density rule tau(x) just exceeds the side of the largest dense dyadic cube
    containing x; under the pre-sparse rule tau(x) = max(1, l(Q)) on the middle
    thirds of the family cubes (the stopping cubes of f by default).
    """
    if C <= 1:
        raise ValueError("density constant must exceed 1")
    E = _as_cube(E)
    if extreme == "max":
        return StoppingTime.constant(E.box, E.side * E.side, mode)
    if extreme != "min":
        raise ValueError("extreme must be 'max' or 'min'")
    if mode == DENSITY:
        floor = _density_floor(f, E, C)
    elif mode == PRESPARSE:
        fam = stopping_cube_scan(f, E, C) if family is None else family
        floor = _presparse_floor(E, fam)
    else:
        raise ValueError(f"unknown admissibility mode {mode!r}")
    return StoppingTime(E.box, floor, mode)


def admissibility_floor(f: LatticeFunction, E, C: float, mode: str = DENSITY, family=None) -> np.ndarray:
    E = _as_cube(E)
    if mode == DENSITY:
        return _density_floor(f, E, C)
    fam = stopping_cube_scan(f, E, C) if family is None else family
    return _presparse_floor(E, fam)


def is_admissible(tau: StoppingTime, f: LatticeFunction, E, C: float, family=None) -> bool:
    """Check tau against its own mode's admissibility rule on E."""
    E = _as_cube(E)
    if tau.domain != E.box:
        return False
    if np.any(tau.tau_sq > E.side * E.side):
        return False
    return bool(np.all(tau.tau_sq >= admissibility_floor(f, E, C, tau.mode, family)))


# ---------------------------------------------------------------------------
# pointwise comparison constants
# ---------------------------------------------------------------------------

def _ratio_max(num: np.ndarray, den: np.ndarray) -> float:
    pos = num > 0
    if not pos.any():
        return 0.0
    if np.any(den[pos] <= 0):
        return math.inf
    return float(np.max(num[pos] / den[pos]))


def ball_comparison_constant(f: LatticeFunction, lambda_sq: int) -> float:
    """Smallest K with A f <= K lambda^2 B f pointwise on the box (B = ball average)."""
    a = spherical_average(f, lambda_sq).values
    b = ball_average(f, math.sqrt(lambda_sq)).values
    return _ratio_max(a, lambda_sq * b)


def annulus_comparison_constant(f: LatticeFunction, lambda_sq: int) -> float:
    """Smallest K with A f <= K lambda * (width-one annulus average of f) pointwise."""
    lam = math.sqrt(lambda_sq)
    a = spherical_average(f, lambda_sq).values
    b = annulus_average(f, lam, 1.0).values
    return _ratio_max(a, lam * b)
