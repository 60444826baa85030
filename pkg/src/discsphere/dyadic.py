"""Dyadic cubes and fast box averages over them."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
import numpy as np

from .lattice import BoxDomain, LatticeFunction


@dataclass(frozen=True)
class DyadicCube:
    """The cube corner + [0, 2^level)^d with corner divisible by 2^level."""

    dimension: int
    level: int
    corner: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "corner", tuple(int(c) for c in self.corner))
        if self.level < 0:
            raise ValueError("level must be >= 0")
        if len(self.corner) != self.dimension:
            raise ValueError("corner length does not match dimension")
        if any(c % self.side for c in self.corner):
            raise ValueError(f"corner {self.corner} is not aligned to side {self.side}")

    @classmethod
    def from_box(cls, box: BoxDomain) -> "DyadicCube":
        level = int(box.side).bit_length() - 1
        if 1 << level != box.side:
            raise ValueError(f"side {box.side} is not a power of two")
        return cls(box.dimension, level, box.corner)

    @property
    def side(self) -> int:
        return 1 << self.level

    @property
    def volume(self) -> int:
        return self.side**self.dimension

    @property
    def box(self) -> BoxDomain:
        return BoxDomain(self.corner, self.side)

    @property
    def lower(self) -> np.ndarray:
        return np.array(self.corner, dtype=np.int64)

    @property
    def upper(self) -> np.ndarray:
        return self.lower + self.side

    def contains_point(self, x) -> bool:
        x = np.asarray(x)
        return bool(np.all((x >= self.lower) & (x < self.upper)))

    def contains(self, other: "DyadicCube") -> bool:
        return other.level <= self.level and self.contains_point(other.corner)

    def nested_or_disjoint(self, other: "DyadicCube") -> bool:
        if self.contains(other) or other.contains(self):
            return True
        return bool(np.any((self.upper <= other.lower) | (other.upper <= self.lower)))

    def children(self) -> list["DyadicCube"]:
        if self.level == 0:
            return []
        h = self.side // 2
        return [
            DyadicCube(self.dimension, self.level - 1, tuple(c + h * b for c, b in zip(self.corner, bits)))
            for bits in itertools.product((0, 1), repeat=self.dimension)
        ]

    def tripled(self) -> tuple[np.ndarray, np.ndarray]:
        """Bounds [lo, hi) of the concentric cube of three times the side."""
        return self.lower - self.side, self.upper + self.side

    def subcubes(self, level: int) -> np.ndarray:
        """Corners of all dyadic subcubes at ``level``, lexicographic order."""
        if not 0 <= level <= self.level:
            raise ValueError("level out of range")
        n = 1 << (self.level - level)
        grid = np.indices((n,) * self.dimension).reshape(self.dimension, -1).T
        return self.lower + grid * (1 << level)


class BoxSums:
    """Summed-area table for a function on a box; vectorized sums over sub-boxes."""

    def __init__(self, f: LatticeFunction):
        self.domain = f.domain
        self.lo = np.array(f.domain.corner, dtype=np.int64)
        self.hi = self.lo + f.domain.side
        table = np.asarray(f.values, dtype=np.float64)
        for axis in range(table.ndim):
            table = np.cumsum(table, axis=axis)
        self.table = np.pad(table, [(1, 0)] * table.ndim)
        self._signs = [
            (np.array(bits, dtype=bool), (-1) ** (f.dimension - sum(bits)))
            for bits in itertools.product((0, 1), repeat=f.dimension)
        ]

    def clip(self, lo, hi) -> tuple[np.ndarray, np.ndarray]:
        lo = np.clip(np.asarray(lo, dtype=np.int64), self.lo, self.hi)
        hi = np.clip(np.asarray(hi, dtype=np.int64), self.lo, self.hi)
        return lo, np.maximum(hi, lo)

    def sums(self, lo, hi) -> np.ndarray:
        """Sum of f over [lo, hi) for arrays of shape (k, d) (clipped to the box)."""
        lo, hi = self.clip(lo, hi)
        lo = np.atleast_2d(lo) - self.lo
        hi = np.atleast_2d(hi) - self.lo
        out = np.zeros(len(lo))
        for bits, sign in self._signs:
            idx = np.where(bits, hi, lo)
            out += sign * self.table[tuple(idx.T)]
        return out

    def volumes(self, lo, hi) -> np.ndarray:
        lo, hi = self.clip(lo, hi)
        return np.prod(np.atleast_2d(hi - lo), axis=1)

    def averages(self, lo, hi) -> np.ndarray:
        """Averages over the clipped boxes, normalized by the clipped volume (0 if empty)."""
        vol = self.volumes(lo, hi)
        s = self.sums(lo, hi)
        return np.divide(s, vol, out=np.zeros_like(s), where=vol > 0)

    def cube_average(self, cube: DyadicCube, tripled: bool = False) -> float:
        lo, hi = cube.tripled() if tripled else (cube.lower, cube.upper)
        return float(self.averages(lo[None], hi[None])[0])

    def level_sums(self, top: DyadicCube, level: int, tripled: bool = False):
        """(corners, sums, clipped volumes) for every dyadic subcube of ``top`` at ``level``."""
        corners = top.subcubes(level)
        side = 1 << level
        if tripled:
            lo, hi = corners - side, corners + 2 * side
        else:
            lo, hi = corners, corners + side
        return corners, self.sums(lo, hi), self.volumes(lo, hi)

    def level_averages(self, top: DyadicCube, level: int, tripled: bool = False) -> tuple[np.ndarray, np.ndarray]:
        corners, s, vol = self.level_sums(top, level, tripled)
        return corners, np.divide(s, vol, out=np.zeros_like(s), where=vol > 0)

    def denser_than(self, top: DyadicCube, level: int, C: float, tripled: bool = False) -> tuple[np.ndarray, np.ndarray]:
        """Corners at ``level`` and the mask <f>_Q > C <f>_top, compared without division."""
        lo, hi = top.tripled() if tripled else (top.lower, top.upper)
        s_top = self.sums(lo[None], hi[None])[0]
        v_top = self.volumes(lo[None], hi[None])[0]
        corners, s, vol = self.level_sums(top, level, tripled)
        return corners, s * v_top > C * s_top * vol


def maximal_cubes(top: DyadicCube, selected_by_level: dict[int, np.ndarray]) -> list[DyadicCube]:
    """Maximal cubes among boolean selections per level (strict subcubes of ``top``)."""
    d = top.dimension
    covered = np.zeros((top.side,) * d, dtype=bool)
    out = []
    for level in range(top.level - 1, -1, -1):
        sel = selected_by_level.get(level)
        if sel is None:
            continue
        corners = top.subcubes(level)[sel]
        for c in corners:
            rel = tuple(int(v) for v in c - top.lower)
            if covered[rel]:
                continue
            side = 1 << level
            covered[tuple(slice(r, r + side) for r in rel)] = True
            out.append(DyadicCube(d, level, tuple(c)))
    return out


def stopping_cube_scan(f: LatticeFunction, top: DyadicCube, C: float) -> list[DyadicCube]:
    """Maximal dyadic Q strictly inside ``top`` with <f>_{3Q} > C <f>_{3 top}.

    Tripled cubes are clipped to the domain of ``f`` and averaged over the
    clipped volume.
    """
    sums = BoxSums(f)
    selected = {}
    for level in range(top.level - 1, -1, -1):
        _, sel = sums.denser_than(top, level, C, tripled=True)
        if sel.any():
            selected[level] = sel
    return maximal_cubes(top, selected)


def dense_cube_scan(f: LatticeFunction, top: DyadicCube, C: float) -> dict[int, np.ndarray]:
    """Per level, the corners of dyadic Q strictly inside ``top`` with <f>_Q > C <f>_top."""
    sums = BoxSums(f)
    out = {}
    for level in range(top.level - 1, -1, -1):
        corners, sel = sums.denser_than(top, level, C)
        if sel.any():
            out[level] = corners[sel]
    return out
