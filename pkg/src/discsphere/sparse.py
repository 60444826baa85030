"""Sparse collections of dyadic cubes, sparse forms, exponent regions and certification."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np

from .dyadic import BoxSums, DyadicCube, stopping_cube_scan
from .errors import RecursionDepthError
from .lattice import LatticeFunction, RadiusSet
from .operators import DENSITY, make_admissible_tau, shell_maximum

log = logging.getLogger(__name__)

INTERIOR, BOUNDARY, OUTSIDE = "interior", "boundary", "outside"


def default_constant(d: int) -> int:
    return 4 * 3**d


# ---------------------------------------------------------------------------
# collections
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SparseCollection:
    """Cubes with major subsets; ``major_sets[i]`` is a boolean mask over cube i."""

    cubes: tuple[DyadicCube, ...]
    major_sets: tuple[np.ndarray, ...]

    def __post_init__(self):
        if len(self.cubes) != len(self.major_sets):
            raise ValueError("one major set per cube required")
        for S, m in zip(self.cubes, self.major_sets):
            if m.shape != (S.side,) * S.dimension:
                raise ValueError("major set mask does not match its cube")

    @classmethod
    def full(cls, cubes) -> "SparseCollection":
        cubes = tuple(cubes)
        return cls(cubes, tuple(np.ones((S.side,) * S.dimension, dtype=bool) for S in cubes))

    def __len__(self) -> int:
        return len(self.cubes)

    def major_points(self, i: int) -> np.ndarray:
        S = self.cubes[i]
        return np.argwhere(self.major_sets[i]) + S.lower


@dataclass(frozen=True)
class SparseVerification:
    disjoint: bool
    contained: bool
    major_fraction_ok: bool
    nested_or_disjoint: bool
    min_fraction: float

    @property
    def ok(self) -> bool:
        return self.disjoint and self.contained and self.major_fraction_ok


def verify_sparse(collection: SparseCollection, eta: Fraction = Fraction(1, 4)) -> SparseVerification:
    """Exact checks: major sets pairwise disjoint, inside their cubes, |E_S| > eta |S|."""
    if not len(collection):
        return SparseVerification(True, True, True, True, 1.0)
    cubes = collection.cubes
    lo = np.min([S.lower for S in cubes], axis=0)
    hi = np.max([S.upper for S in cubes], axis=0)
    counts = np.zeros(tuple(hi - lo), dtype=np.int64)
    frac_ok = True
    min_frac = Fraction(1)
    for S, mask in zip(cubes, collection.major_sets):
        rel = S.lower - lo
        counts[tuple(slice(int(r), int(r) + S.side) for r in rel)] += mask
        size = int(mask.sum())
        frac = Fraction(size, S.volume)
        min_frac = min(min_frac, frac)
        frac_ok &= frac > eta
    nested = all(a.nested_or_disjoint(b) for i, a in enumerate(cubes) for b in cubes[i + 1 :])
    # masks are indexed by their own cube, so containment holds by construction
    return SparseVerification(bool(counts.max() <= 1), True, bool(frac_ok), nested, float(min_frac))


def _power_mean_sums(f: LatticeFunction, r: float) -> BoxSums:
    vals = np.abs(np.asarray(f.values, dtype=np.float64)) ** r
    return BoxSums(LatticeFunction(f.domain, vals))


def sparse_form(collection: SparseCollection, f: LatticeFunction, g: LatticeFunction, r: float, s: float) -> float:
    """sum over S of |S| <f>_{S,r} <g>_{S,s}, where <f>_{S,r} = (|S|^-1 sum_S |f|^r)^(1/r)."""
    if r < 1 or s < 1:
        raise ValueError("need r, s >= 1")
    if not len(collection):
        return 0.0
    fs, gs = _power_mean_sums(f, r), _power_mean_sums(g, s)
    lo = np.array([S.lower for S in collection.cubes])
    hi = np.array([S.upper for S in collection.cubes])
    vol = np.array([S.volume for S in collection.cubes], dtype=np.float64)
    fa = fs.sums(lo, hi) / vol
    ga = gs.sums(lo, hi) / vol
    return float(np.sum(vol * np.maximum(fa, 0) ** (1 / r) * np.maximum(ga, 0) ** (1 / s)))


# ---------------------------------------------------------------------------
# exponent regions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RegionPolygon:
    dimension: int
    family: str
    vertices: tuple[tuple[Fraction, Fraction], ...]

    def as_strings(self) -> list[list[str]]:
        return [[str(x), str(y)] for x, y in self.vertices]


def _r_vertices(d: int) -> tuple[tuple[Fraction, Fraction], ...]:
    F = Fraction
    return (
        (F(d - 1, d), F(1, d)),
        (F(d - 1, d), F(d - 1, d)),
        (F(d * d - d, d * d + 1), F(d * d - d + 2, d * d + 1)),
        (F(0), F(1)),
    )


def region_vertices(d: int, family: str) -> RegionPolygon:
    """Exact vertices of the R polygon or its contraction Z toward (1/2, 1/2)."""
    if family == "R":
        if d < 3:
            raise ValueError("family R needs d >= 3")
        return RegionPolygon(d, "R", _r_vertices(d))
    if family == "Z":
        if d < 5:
            raise ValueError("family Z needs d >= 5")
        R = _r_vertices(d)
        s, t = Fraction(d - 4, d - 2), Fraction(2, d - 2)
        half = Fraction(1, 2)
        Z = tuple((s * x + t * half, s * y + t * half) for x, y in R[:3]) + ((Fraction(0), Fraction(1)),)
        return RegionPolygon(d, "Z", Z)
    raise ValueError(f"unknown family {family!r}")


def _cross(o, a, b) -> Fraction:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def collinear(a, b, c) -> bool:
    return _cross(a, b, c) == 0


def region_contains(d: int, family: str, inv_p, inv_q) -> str:
    """Exact point location in the convex polygon: interior, boundary or outside."""
    p = (Fraction(inv_p), Fraction(inv_q))
    if not (0 <= p[0] <= 1 and 0 <= p[1] <= 1):
        raise ValueError("exponent coordinates must lie in [0, 1]")
    V = region_vertices(d, family).vertices
    n = len(V)
    area = sum(_cross(V[0], V[i], V[i + 1]) for i in range(1, n - 1))
    sign = 1 if area > 0 else -1
    on_edge = False
    for i in range(n):
        c = sign * _cross(V[i], V[(i + 1) % n], p)
        if c < 0:
            return OUTSIDE
        if c == 0:
            on_edge = True
    return BOUNDARY if on_edge else INTERIOR


# ---------------------------------------------------------------------------
# stopping-cube recursion
# ---------------------------------------------------------------------------

def stopping_cubes(f: LatticeFunction, E: DyadicCube, C: float) -> list[DyadicCube]:
    """Maximal dyadic Q strictly inside E with <f>_{3Q} > C <f>_{3E} (tripled cubes clipped)."""
    if C < 1:
        raise ValueError("need C >= 1")
    return stopping_cube_scan(f, E, C)


@dataclass(eq=False)
class SparseBuild:
    collection: SparseCollection
    stopping_times: list  # StoppingTime per cube
    children: list[list[int]]
    packing: list[float]  # sum of child volumes / |S| per cube
    depth: int


def build_sparse_collection(f: LatticeFunction, g: LatticeFunction | None, E, C: float | None = None,
                            mode: str = DENSITY) -> SparseBuild:
    """Pre-order stopping-cube recursion from E, with major sets E_S = S minus the children."""
    E = E if isinstance(E, DyadicCube) else DyadicCube.from_box(E)
    C = default_constant(E.dimension) if C is None else C
    cubes, masks, taus, kids, packing = [], [], [], [], []
    max_depth = E.level
    deepest = 0

    def visit(S: DyadicCube, depth: int) -> int:
        nonlocal deepest
        if depth > max_depth:
            raise RecursionDepthError(f"stopping-cube recursion exceeded depth {max_depth}")
        deepest = max(deepest, depth)
        i = len(cubes)
        lo, hi = S.tripled()
        local = f.restricted(lo, hi)
        found = stopping_cubes(local, S, C)
        mask = np.ones((S.side,) * S.dimension, dtype=bool)
        for Q in found:
            rel = Q.lower - S.lower
            mask[tuple(slice(int(r), int(r) + Q.side) for r in rel)] = False
        cubes.append(S)
        masks.append(mask)
        taus.append(make_admissible_tau(local, S, C, mode, extreme="min", family=found))
        kids.append([])
        packing.append(sum(Q.volume for Q in found) / S.volume)
        for Q in found:
            kids[i].append(visit(Q, depth + 1))
        return i

    visit(E, 0)
    coll = SparseCollection(tuple(cubes), tuple(masks))
    return SparseBuild(coll, taus, kids, packing, deepest)


# ---------------------------------------------------------------------------
# certification
# ---------------------------------------------------------------------------

@dataclass
class CertificationReport:
    pairing: float
    sparse_form: float
    ratio: float
    maximal_pairing: float
    best_sparse_form: float
    maximal_ratio: float
    region_class: str
    cube_count: int
    depth: int
    packing_max: float
    verified: bool
    inv_p: str
    inv_q: str
    r: float
    s: float
    C: float
    radii_max_sq: int
    label: str = "empirical constant"
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def _as_fraction(v) -> Fraction:
    if isinstance(v, float):
        return Fraction(v).limit_denominator(10**6)
    return Fraction(v)


def certify_constant(f: LatticeFunction, g: LatticeFunction, inv_p, inv_q, radii: RadiusSet | None = None,
                     C: float | None = None, E=None, mode: str = DENSITY) -> CertificationReport:
    """Empirical sparse constant <A_tau f, g> / Lambda_{S, p, q}(f, g) over the recursion-built collection.

    Per cube S and x in G intersect E_S, tau(x) maximizes A_lambda(f 1_{3S})(x) over
    radii between the admissible floor at x and l(S); this is itself admissible.
    """
    E = DyadicCube.from_box(g.domain) if E is None else (E if isinstance(E, DyadicCube) else DyadicCube.from_box(E))
    d = E.dimension
    C = default_constant(d) if C is None else C
    radii = RadiusSet.upto(E.side * E.side) if radii is None else radii
    ip, iq = _as_fraction(inv_p), _as_fraction(inv_q)
    if not (0 < ip <= 1 and 0 < iq <= 1):
        raise ValueError("inverse exponents must lie in (0, 1]")
    d_cls = region_contains(d, "Z", ip, iq) if d >= 5 else "unclassified"
    r, s = float(1 / ip), float(1 / iq)

    build = build_sparse_collection(f, g, E, C, mode)
    coll = build.collection
    ver = verify_sparse(coll)

    gpts, gvals = g.support()
    in_E = np.all((gpts >= E.lower) & (gpts < E.upper), axis=1)
    gpts, gvals = gpts[in_E], gvals[in_E]
    plain, _ = shell_maximum(f, gpts, radii)
    maximal_pairing = float(np.dot(plain, gvals))

    r_min, r_max = radii.entries[0], radii.max_sq
    pairing = 0.0
    for S, mask, tau in zip(coll.cubes, coll.major_sets, build.stopping_times):
        inside = np.all((gpts >= S.lower) & (gpts < S.upper), axis=1)
        rel = gpts[inside] - S.lower
        sel = np.flatnonzero(inside)[mask[tuple(rel.T)]]
        if not len(sel):
            continue
        xs = gpts[sel]
        floor = tau.tau_sq[tuple((xs - S.lower).T)]
        top = S.side * S.side
        lo3, hi3 = S.tripled()
        covers = np.all(lo3 <= np.array(f.domain.corner)) and np.all(hi3 >= np.array(f.domain.upper))
        if covers and top >= r_max and np.all(floor <= r_min):
            vals = plain[sel]
        else:
            vals, _ = shell_maximum(f.restricted(lo3, hi3), xs, radii, lo=floor, hi=np.full(len(xs), top))
        pairing += float(np.dot(vals, gvals[sel]))

    lam = sparse_form(coll, f, g, r, s)
    lam_top = sparse_form(SparseCollection.full([E]), f, g, r, s)
    best = max(lam, lam_top)

    def ratio(num, den):
        if den > 0:
            return num / den
        return 0.0 if num == 0 else math.inf

    return CertificationReport(
        pairing=pairing, sparse_form=lam, ratio=ratio(pairing, lam),
        maximal_pairing=maximal_pairing, best_sparse_form=best, maximal_ratio=ratio(maximal_pairing, best),
        region_class=d_cls, cube_count=len(coll), depth=build.depth,
        packing_max=max(build.packing), verified=ver.ok,
        inv_p=str(ip), inv_q=str(iq), r=r, s=s, C=float(C), radii_max_sq=r_max,
    )
