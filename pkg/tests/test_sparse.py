import itertools
import math
from fractions import Fraction

import numpy as np
import pytest

import discsphere.sparse as sp
from discsphere.dyadic import BoxSums, DyadicCube, dense_cube_scan
from discsphere.errors import RecursionDepthError
from discsphere.lattice import BoxDomain, LatticeFunction, RadiusSet
from discsphere.operators import is_admissible, maximal_average
from discsphere.sparse import (
    BOUNDARY,
    INTERIOR,
    OUTSIDE,
    SparseCollection,
    build_sparse_collection,
    certify_constant,
    collinear,
    default_constant,
    region_contains,
    region_vertices,
    sparse_form,
    stopping_cubes,
    verify_sparse,
)

from oracles import dense_cubes_exhaustive, tripled_average

F = Fraction


def random_indicator(box, density, seed):
    rng = np.random.default_rng(seed)
    return LatticeFunction(box, (rng.random(box.shape) < density).astype(float), indicator=True)


# dyadic cubes --------------------------------------------------------------

def test_dyadic_cube_alignment():
    with pytest.raises(ValueError):
        DyadicCube(2, 2, (2, 0))
    Q = DyadicCube(2, 2, (4, -8))
    assert Q.side == 4 and Q.volume == 16
    assert len(Q.children()) == 4 and all(Q.contains(c) for c in Q.children())


def test_dyadic_cubes_nested_or_disjoint():
    E = DyadicCube(2, 3, (0, 0))
    cubes = [DyadicCube(2, lvl, tuple(c)) for lvl in range(4) for c in E.subcubes(lvl)]
    for a, b in itertools.combinations(cubes, 2):
        assert a.nested_or_disjoint(b)


def test_box_sums_match_slicing():
    f = random_indicator(BoxDomain((-3, 2, 0), 7), 0.5, 0)
    sums = BoxSums(f)
    rng = np.random.default_rng(1)
    for _ in range(30):
        lo = rng.integers(-6, 8, size=3) + np.array([0, 2, 0])
        hi = lo + rng.integers(0, 9, size=3)
        assert sums.sums(lo[None], hi[None])[0] == pytest.approx(f.region_sum(lo, hi))


def test_dense_scan_matches_exhaustive():
    E = DyadicCube(3, 3, (0, 0, 0))
    f = random_indicator(E.box, 0.1, 4)
    C = 2.0
    found = dense_cube_scan(f, E, C)
    got = {(1 << lvl, tuple(int(v) for v in c)) for lvl, cs in found.items() for c in cs}
    assert got == dense_cubes_exhaustive(f.values, E.corner, E.side, C)


def test_stopping_cubes_match_exhaustive_tripled_scan():
    E = DyadicCube(2, 4, (0, 0))
    f = random_indicator(E.box, 0.05, 3)
    C = 3.0
    top = tripled_average(f.values, E.corner, E.corner, E.side)
    dense = set()
    for lvl in range(E.level):
        side = 1 << lvl
        for c in E.subcubes(lvl):
            if tripled_average(f.values, E.corner, c, side) > C * top:
                dense.add(DyadicCube(2, lvl, tuple(c)))
    maximal = {Q for Q in dense if not any(P != Q and P.contains(Q) for P in dense)}
    assert set(stopping_cubes(f, E, C)) == maximal


def test_stopping_cubes_trivial_inputs():
    E = DyadicCube(3, 3, (0, 0, 0))
    assert stopping_cubes(LatticeFunction.zeros(E.box), E, 2.0) == []
    assert stopping_cubes(LatticeFunction.ones(E.box), E, 1.0) == []


def test_stopping_cube_packing_on_random_inputs():
    E = DyadicCube(5, 4, (0,) * 5)
    for seed in range(3):
        f = random_indicator(E.box, 0.05, seed)
        cubes = stopping_cubes(f, E, default_constant(5))
        assert sum(Q.volume for Q in cubes) <= E.volume / 4


# sparse forms ----------------------------------------------------------------

def test_sparse_form_examples():
    E = DyadicCube(2, 2, (0, 0))
    one = LatticeFunction.ones(E.box)
    assert sparse_form(SparseCollection.full([E]), one, one, 1.5, 2.0) == pytest.approx(16)
    assert sparse_form(SparseCollection.full([]), one, one, 1.0, 1.0) == 0.0
    line = LatticeFunction.ones(BoxDomain((0,), 4))
    coll = SparseCollection.full([DyadicCube(1, 1, (0,)), DyadicCube(1, 1, (2,))])
    assert sparse_form(coll, line, line, 1.0, 1.0) == pytest.approx(4)


def test_sparse_form_power_means():
    box = BoxDomain((0,), 4)
    f = LatticeFunction(box, np.array([2.0, 0.0, 0.0, 0.0]))
    g = LatticeFunction.ones(box)
    coll = SparseCollection.full([DyadicCube(1, 2, (0,))])
    assert sparse_form(coll, f, g, 2.0, 1.0) == pytest.approx(4 * math.sqrt(4 / 4))


def test_verify_sparse_detects_overlap_and_small_major_sets():
    a = DyadicCube(1, 2, (0,))
    b = DyadicCube(1, 1, (0,))
    assert not verify_sparse(SparseCollection.full([a, b])).ok
    mask = np.array([True, False, False, False])
    assert not verify_sparse(SparseCollection((a,), (mask,))).ok
    carved = np.array([False, False, True, True])
    assert verify_sparse(SparseCollection((a, b), (carved, np.ones(2, bool)))).ok


# recursion ---------------------------------------------------------------------

def test_empty_input_gives_single_cube():
    E = DyadicCube(3, 3, (0, 0, 0))
    build = build_sparse_collection(LatticeFunction.zeros(E.box), None, E)
    assert len(build.collection) == 1 and build.collection.major_sets[0].all()


def test_one_dimensional_chain():
    box = BoxDomain((0,), 64)
    f = LatticeFunction.delta(box, (5,))
    build = build_sparse_collection(f, None, box, C=4.0)
    coll = build.collection
    assert coll.cubes[0] == DyadicCube(1, 6, (0,))
    assert verify_sparse(coll).ok
    # every emitted cube contains the point mass or sits next to it
    for S in coll.cubes[1:]:
        lo, hi = S.tripled()
        assert lo[0] <= 5 < hi[0]
    assert all(p <= 0.25 for p in build.packing)
    for S, tau in zip(coll.cubes, build.stopping_times):
        assert tau.domain == S.box


def test_recursion_stopping_times_admissible():
    E = DyadicCube(2, 5, (0, 0))
    f = LatticeFunction.from_points(E.box, DyadicCube(2, 1, (6, 10)).box.points())
    build = build_sparse_collection(f, None, E, C=8.0)
    assert verify_sparse(build.collection).ok
    for S, tau in zip(build.collection.cubes, build.stopping_times):
        lo, hi = S.tripled()
        assert is_admissible(tau, f.restricted(lo, hi), S, 8.0)


def test_random_d5_collection_is_sparse():
    E = DyadicCube(5, 4, (0,) * 5)
    f = random_indicator(E.box, 0.1, 0)
    build = build_sparse_collection(f, None, E)
    assert verify_sparse(build.collection).ok


def test_recursion_depth_cap(monkeypatch):
    E = DyadicCube(1, 3, (0,))
    f = LatticeFunction.delta(E.box, (0,))

    def always(local, S, C):
        return S.children()[:1] if S.level else []

    monkeypatch.setattr(sp, "stopping_cubes", always)
    build = sp.build_sparse_collection(f, None, E, C=2.0)
    assert build.depth == 3
    monkeypatch.setattr(sp, "stopping_cubes", lambda local, S, C: [S])
    with pytest.raises(RecursionDepthError):
        sp.build_sparse_collection(f, None, E, C=2.0)


# certification -----------------------------------------------------------------

def test_certify_zero_function():
    box = BoxDomain((0,) * 5, 8)
    rep = certify_constant(LatticeFunction.zeros(box), LatticeFunction.ones(box), F(1, 2), F(1, 2))
    assert rep.ratio == 0.0 and rep.pairing == 0.0


def test_certify_constant_functions_single_cube():
    box = BoxDomain((0,) * 5, 8)
    one = LatticeFunction.ones(box)
    radii = RadiusSet.upto(16)
    rep = certify_constant(one, one, F(1, 2), F(1, 2), radii=radii)
    assert rep.cube_count == 1
    # direct evaluation: the pairing is the maximal pairing over the radius set
    direct = maximal_average(one, radii).output.total()
    assert rep.pairing == pytest.approx(direct)
    assert rep.sparse_form == pytest.approx(box.volume)
    assert rep.ratio == pytest.approx(direct / box.volume)


def test_certify_report_fields():
    box = BoxDomain((0,) * 5, 8)
    f, g = random_indicator(box, 0.1, 1), random_indicator(box, 0.1, 2)
    rep = certify_constant(f, g, F(29, 50), F(29, 50))
    assert rep.region_class == INTERIOR and rep.verified
    assert math.isfinite(rep.ratio) and rep.label == "empirical constant"
    assert rep.pairing <= rep.maximal_pairing + 1e-9


def test_certify_translation_stability():
    d, side = 5, 8
    box = BoxDomain((0,) * d, side)
    rng = np.random.default_rng(5)
    core = rng.random((4,) * d) < 0.2
    ratios = []
    for shift in (0, 2, 4):
        arr = np.zeros(box.shape)
        arr[tuple(slice(shift, shift + 4) for _ in range(d))] = core
        f = LatticeFunction(box, arr, indicator=True)
        ratios.append(certify_constant(f, f, F(29, 50), F(29, 50)).ratio)
    assert max(ratios) / min(ratios) < 2


# regions -----------------------------------------------------------------------

def test_z_vertices_d5():
    V = region_vertices(5, "Z").vertices
    assert V == ((F(3, 5), F(2, 5)), (F(3, 5), F(3, 5)), (F(23, 39), F(8, 13)), (F(0), F(1)))
    assert V[2] == (F(46, 78), F(48, 78))


@pytest.mark.parametrize("d", [5, 6, 7, 9])
def test_z_vertices_collinear_with_center_and_r(d):
    R = region_vertices(d, "R").vertices
    Z = region_vertices(d, "Z").vertices
    half = (F(1, 2), F(1, 2))
    for j in range(3):
        assert collinear(half, R[j], Z[j])
    assert R[3] == Z[3] == (F(0), F(1))


def test_region_classification():
    assert region_contains(5, "Z", 0, 1) == BOUNDARY
    assert region_contains(5, "Z", F(3, 5), F(3, 5)) == BOUNDARY
    assert region_contains(5, "Z", F(29, 50), F(29, 50)) == INTERIOR
    assert region_contains(5, "Z", F(1, 2), F(1, 3)) == OUTSIDE


def test_center_point_lies_on_the_top_edge():
    # Z_3 = (0, 1) and Z_0 = ((d-2)/d, 2/d) both satisfy x + y = 1
    assert region_contains(5, "Z", F(1, 2), F(1, 2)) == BOUNDARY


def test_region_rejects_bad_dimension():
    with pytest.raises(ValueError):
        region_vertices(4, "Z")
    with pytest.raises(ValueError):
        region_vertices(2, "R")
