"""Lattice spheres, balls and box-supported functions on Z^d.

Points are stored as ``int64`` arrays of shape ``(count, d)`` in lexicographic
order, so every enumeration is reproducible byte for byte.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .errors import CapacityError

DEFAULT_POINT_CAP = 2**27


def _freeze(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


# ---------------------------------------------------------------------------
# representation counts
# ---------------------------------------------------------------------------

def _squares_indicator(M: int) -> list[int]:
    r1 = [0] * (M + 1)
    for j in range(-math.isqrt(M), math.isqrt(M) + 1):
        r1[j * j] += 1
    return r1


@lru_cache(maxsize=None)
def _count_table(d: int, M: int) -> tuple[int, ...]:
    """r_d(0..M) via r_d(m) = sum_j r_{d-1}(m - j^2)."""
    r1 = np.array(_squares_indicator(M), dtype=np.int64)
    if d == 1:
        return tuple(int(v) for v in r1)
    prev = _count_table(d - 1, M)
    # (2 sqrt(M) + 1)^d bounds every entry; stay in int64 while that fits
    if d * math.log2(2 * math.isqrt(M) + 2) < 62:
        out = np.convolve(np.array(prev, dtype=np.int64), r1)[: M + 1]
        return tuple(int(v) for v in out)
    squares = [j * j for j in range(math.isqrt(M) + 1)]
    out = []
    for m in range(M + 1):
        s = prev[m]
        for j2 in squares[1:]:
            if j2 > m:
                break
            s += 2 * prev[m - j2]
        out.append(s)
    return tuple(out)


def representation_counts(d: int, M: int) -> tuple[int, ...]:
    """Exact table ``(r_d(0), ..., r_d(M))`` as Python ints."""
    if d < 1 or M < 0:
        raise ValueError("need d >= 1 and M >= 0")
    size = 64
    while size < M:
        size *= 2
    return _count_table(d, size)[: M + 1]


def representation_count(d: int, m: int) -> int:
    """Number of n in Z^d with |n|^2 = m, without materializing the points."""
    if d < 1 or m < 0:
        raise ValueError("need d >= 1 and m >= 0")
    return representation_counts(d, m)[m]


# ---------------------------------------------------------------------------
# enumeration
# ---------------------------------------------------------------------------

def _shell_rec(d: int, m: int, memo: dict) -> np.ndarray:
    key = (d, m)
    if key in memo:
        return memo[key]
    s = math.isqrt(m)
    if d == 1:
        if s * s != m:
            out = np.empty((0, 1), dtype=np.int64)
        elif s == 0:
            out = np.zeros((1, 1), dtype=np.int64)
        else:
            out = np.array([[-s], [s]], dtype=np.int64)
        memo[key] = out
        return out
    pieces = []
    for x in range(-s, s + 1):
        sub = _shell_rec(d - 1, m - x * x, memo)
        if len(sub):
            head = np.full((len(sub), 1), x, dtype=np.int64)
            pieces.append(np.hstack([head, sub]))
    out = np.vstack(pieces) if pieces else np.empty((0, d), dtype=np.int64)
    memo[key] = out
    return out


def _ball_rec(d: int, budget: int, memo: dict) -> np.ndarray:
    key = (d, budget)
    if key in memo:
        return memo[key]
    s = math.isqrt(budget)
    if d == 1:
        out = np.arange(-s, s + 1, dtype=np.int64)[:, None]
        memo[key] = out
        return out
    pieces = []
    for x in range(-s, s + 1):
        sub = _ball_rec(d - 1, budget - x * x, memo)
        head = np.full((len(sub), 1), x, dtype=np.int64)
        pieces.append(np.hstack([head, sub]))
    out = np.vstack(pieces)
    memo[key] = out
    return out


@dataclass(frozen=True, eq=False)
class SphereShell:
    """All n in Z^d with |n|^2 == radius_sq, lexicographically ordered."""

    dimension: int
    radius_sq: int
    points: np.ndarray

    @property
    def count(self) -> int:
        return int(self.points.shape[0])

    @property
    def radius(self) -> float:
        return math.sqrt(self.radius_sq)


def enumerate_sphere(d: int, m: int, cap: int = DEFAULT_POINT_CAP) -> SphereShell:
    if d < 1 or m < 0:
        raise ValueError("need d >= 1 and m >= 0")
    projected = representation_count(d, m)
    if projected > cap:
        raise CapacityError(
            f"sphere |n|^2={m} in Z^{d} has {projected} points, cap is {cap}"
        )
    pts = _shell_rec(d, m, {}).copy()
    return SphereShell(d, m, _freeze(pts))


def ball_radius_sq(R: float) -> int:
    """Largest integer m with m <= R^2 (tolerant of float round-off)."""
    if R < 0:
        raise ValueError("radius must be nonnegative")
    if float(R).is_integer():
        return int(R) ** 2
    return int(math.floor(R * R + 1e-12))


def enumerate_ball(d: int, R: float, cap: int = DEFAULT_POINT_CAP) -> np.ndarray:
    """All n in Z^d with |n| <= R, lexicographically ordered."""
    M = ball_radius_sq(R)
    projected = sum(representation_counts(d, M))
    if projected > cap:
        raise CapacityError(f"ball of radius {R} in Z^{d} has {projected} points, cap is {cap}")
    return _freeze(_ball_rec(d, M, {}).copy())


# ---------------------------------------------------------------------------
# boxes and functions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoxDomain:
    """The cube {corner + v : 0 <= v_i < side}."""

    corner: tuple[int, ...]
    side: int

    def __post_init__(self):
        object.__setattr__(self, "corner", tuple(int(c) for c in self.corner))
        if self.side < 1:
            raise ValueError("box side must be positive")
        if not self.corner:
            raise ValueError("box needs at least one dimension")

    @classmethod
    def centered(cls, d: int, radius: int) -> "BoxDomain":
        return cls((-radius,) * d, 2 * radius + 1)

    @property
    def dimension(self) -> int:
        return len(self.corner)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.side,) * self.dimension

    @property
    def volume(self) -> int:
        return self.side**self.dimension

    @property
    def upper(self) -> tuple[int, ...]:
        """Exclusive upper corner."""
        return tuple(c + self.side for c in self.corner)

    def points(self) -> np.ndarray:
        grid = np.indices(self.shape).reshape(self.dimension, -1).T
        return grid + np.asarray(self.corner, dtype=np.int64)

    def contains(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts)
        rel = pts - np.asarray(self.corner)
        return np.all((rel >= 0) & (rel < self.side), axis=-1)

    def index(self, pts: np.ndarray) -> tuple[np.ndarray, ...]:
        rel = np.asarray(pts) - np.asarray(self.corner)
        return tuple(rel.T)

    def clip(self, lo: Sequence[int], hi: Sequence[int]) -> tuple[tuple[int, ...], tuple[int, ...]]:
        """Intersect the half-open region [lo, hi) with the box (per axis)."""
        up = self.upper
        clo = tuple(max(a, c) for a, c in zip(lo, self.corner))
        chi = tuple(min(b, u) for b, u in zip(hi, up))
        return clo, chi


@dataclass(frozen=True, eq=False)
class LatticeFunction:
    """Real values on the points of a box; zero everywhere else."""

    domain: BoxDomain
    values: np.ndarray
    indicator: bool = False

    def __post_init__(self):
        vals = np.array(self.values, dtype=np.float64)
        if vals.shape != self.domain.shape:
            raise ValueError(f"values shape {vals.shape} != box shape {self.domain.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("values must be finite")
        if self.indicator and not np.all((vals == 0) | (vals == 1)):
            raise ValueError("indicator function must take values in {0, 1}")
        object.__setattr__(self, "values", _freeze(vals))

    # constructors ---------------------------------------------------------
    @classmethod
    def zeros(cls, domain: BoxDomain) -> "LatticeFunction":
        return cls(domain, np.zeros(domain.shape), indicator=True)

    @classmethod
    def ones(cls, domain: BoxDomain) -> "LatticeFunction":
        return cls(domain, np.ones(domain.shape), indicator=True)

    @classmethod
    def from_points(cls, domain: BoxDomain, pts, values=None) -> "LatticeFunction":
        """Function on ``domain`` with the given point values (default 1)."""
        pts = np.asarray(pts, dtype=np.int64).reshape(-1, domain.dimension)
        if not np.all(domain.contains(pts)):
            raise ValueError("points outside the box")
        arr = np.zeros(domain.shape)
        if values is None:
            arr[domain.index(pts)] = 1.0
            return cls(domain, arr, indicator=True)
        np.add.at(arr, domain.index(pts), np.asarray(values, dtype=np.float64))
        return cls(domain, arr)

    @classmethod
    def delta(cls, domain: BoxDomain, point=None) -> "LatticeFunction":
        point = (0,) * domain.dimension if point is None else tuple(point)
        return cls.from_points(domain, [point])

    # queries --------------------------------------------------------------
    @property
    def dimension(self) -> int:
        return self.domain.dimension

    def value_at(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=np.int64).reshape(-1, self.dimension)
        out = np.zeros(len(pts))
        inside = self.domain.contains(pts)
        out[inside] = self.values[self.domain.index(pts[inside])]
        return out

    def support(self) -> tuple[np.ndarray, np.ndarray]:
        """Nonzero points (lexicographic) and their values."""
        idx = np.nonzero(self.values)
        pts = np.stack(idx, axis=1).astype(np.int64) + np.asarray(self.domain.corner)
        return pts, self.values[idx]

    def total(self) -> float:
        return float(self.values.sum())

    def region_sum(self, lo, hi) -> float:
        clo, chi = self.domain.clip(lo, hi)
        if any(a >= b for a, b in zip(clo, chi)):
            return 0.0
        sl = tuple(slice(a - c, b - c) for a, b, c in zip(clo, chi, self.domain.corner))
        return float(self.values[sl].sum())

    def restricted(self, lo, hi) -> "LatticeFunction":
        """Copy of ``self`` multiplied by the indicator of [lo, hi)."""
        clo, chi = self.domain.clip(lo, hi)
        arr = np.zeros(self.domain.shape)
        if all(a < b for a, b in zip(clo, chi)):
            sl = tuple(slice(a - c, b - c) for a, b, c in zip(clo, chi, self.domain.corner))
            arr[sl] = self.values[sl]
        return LatticeFunction(self.domain, arr, self.indicator)

    def scaled(self, c: float) -> "LatticeFunction":
        return LatticeFunction(self.domain, self.values * c, self.indicator and c in (0, 1))


@dataclass(frozen=True)
class RadiusSet:
    """Admissible squared radii lambda^2 (integers >= 1), strictly increasing."""

    entries: tuple[int, ...]

    def __post_init__(self):
        entries = tuple(int(e) for e in self.entries)
        if not entries:
            raise ValueError("radius set is empty")
        if entries[0] < 1 or any(b <= a for a, b in zip(entries, entries[1:])):
            raise ValueError("radius set must be strictly increasing integers >= 1")
        object.__setattr__(self, "entries", entries)

    @classmethod
    def of(cls, values: Iterable[int]) -> "RadiusSet":
        return cls(tuple(sorted(set(int(v) for v in values))))

    @classmethod
    def upto(cls, max_sq: int) -> "RadiusSet":
        return cls(tuple(range(1, max_sq + 1)))

    @property
    def max_sq(self) -> int:
        return self.entries[-1]

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def mask(self, m_max: int | None = None) -> np.ndarray:
        m_max = self.max_sq if m_max is None else m_max
        out = np.zeros(m_max + 1, dtype=np.bool_)
        e = np.array([v for v in self.entries if v <= m_max], dtype=np.int64)
        out[e] = True
        return out
