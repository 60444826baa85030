import math

import numpy as np
import pytest

from discsphere import _kernels
from discsphere.dyadic import DyadicCube
from discsphere.errors import CapacityError, EmptyAnnulusError
from discsphere.lattice import BoxDomain, LatticeFunction, RadiusSet, enumerate_sphere, representation_count
from discsphere.operators import (
    DENSITY,
    PRESPARSE,
    StoppingTime,
    annulus_average,
    annulus_comparison_constant,
    annulus_points,
    ball_average,
    ball_comparison_constant,
    in_third,
    is_admissible,
    make_admissible_tau,
    maximal_average,
    shell_maximum,
    spherical_average,
    stopping_time_average,
)
from discsphere.sparse import stopping_cubes

from oracles import dense_cubes_exhaustive, sphere_average_bruteforce


def random_indicator(box, density, seed):
    rng = np.random.default_rng(seed)
    return LatticeFunction(box, (rng.random(box.shape) < density).astype(float), indicator=True)


def test_point_mass_gives_scaled_shell():
    box = BoxDomain.centered(5, 4)
    out = spherical_average(LatticeFunction.delta(box), 9)
    shell = {tuple(p) for p in enumerate_sphere(5, 9).points}
    expected = np.array([9 ** -1.5 if tuple(x) in shell else 0.0 for x in box.points()])
    assert np.array_equal(out.values.reshape(-1), expected)


def test_constant_function_at_center():
    lam_sq = 4
    box = BoxDomain.centered(5, 4)
    out = spherical_average(LatticeFunction.ones(box), lam_sq, out_box=BoxDomain.centered(5, 0))
    assert out.values.reshape(-1)[0] == pytest.approx(lam_sq ** -1.5 * representation_count(5, lam_sq), rel=1e-14)


def test_sphere_indicator_at_origin():
    box = BoxDomain.centered(5, 3)
    f = LatticeFunction.from_points(box, enumerate_sphere(5, 9).points)
    out = spherical_average(f, 9, out_box=BoxDomain.centered(5, 0))
    assert out.values.reshape(-1)[0] == pytest.approx(9 ** -1.5 * representation_count(5, 9), rel=1e-14)


def test_spherical_average_matches_bruteforce_convolution():
    box = BoxDomain((-3, -3, -3), 6)
    f = random_indicator(box, 0.3, 1)
    table = {tuple(p): v for p, v in zip(*f.support())}
    out = spherical_average(f, 5)
    for x in box.points()[::7]:
        assert out.value_at(x)[0] == pytest.approx(sphere_average_bruteforce(table, 3, 5, x), abs=1e-13)


def test_sup_norm_bound_and_positivity():
    box = BoxDomain((0,) * 4, 6)
    f = random_indicator(box, 0.5, 2)
    for m in (1, 3, 6):
        out = spherical_average(f, m).values
        assert out.min() >= 0
        assert out.max() <= m ** -1.0 * representation_count(4, m) + 1e-12


def test_capacity_error():
    box = BoxDomain.centered(5, 3)
    with pytest.raises(CapacityError):
        spherical_average(LatticeFunction.ones(box), 9, cap=1000)


def test_ball_point_mass():
    box = BoxDomain.centered(5, 2)
    d0 = LatticeFunction.delta(box)
    assert np.array_equal(ball_average(d0, 0.7).values, d0.values)
    out = ball_average(d0, 1.0).values
    assert np.count_nonzero(out) == 11
    assert np.allclose(out[out > 0], 1 / 11)


@pytest.mark.parametrize("lam_sq", [4, 9, 16])
def test_ball_comparison_constant_is_finite(lam_sq):
    f = random_indicator(BoxDomain((0,) * 5, 8), 0.2, lam_sq)
    K = ball_comparison_constant(f, lam_sq)
    assert 0 < K < math.inf


def test_annulus_wide_contains_origin():
    box = BoxDomain.centered(3, 3)
    out = annulus_average(LatticeFunction.delta(box), 2.0, 3.0)
    n = len(annulus_points(3, 2.0, 3.0))
    assert out.value_at([[0, 0, 0]])[0] == pytest.approx(1 / n)


def test_thin_annulus_is_the_shell_and_proportional():
    pts = annulus_points(5, 3.0, 0.1)
    assert {tuple(p) for p in pts} == {tuple(p) for p in enumerate_sphere(5, 9).points}
    f = random_indicator(BoxDomain.centered(5, 3), 0.3, 4)
    ann = annulus_average(f, 3.0, 0.1).values
    sph = spherical_average(f, 9).values
    assert np.allclose(ann * representation_count(5, 9) * 3.0 ** -3, sph, atol=1e-14)


def test_half_width_annulus_picks_up_more_than_the_shell():
    pts = annulus_points(5, 3.0, 0.5)
    norms = (pts**2).sum(axis=1)
    assert set(np.unique(norms)) == {7, 8, 9}


def test_annulus_of_constant_is_one():
    box = BoxDomain.centered(5, 5)
    out = annulus_average(LatticeFunction.ones(box), 3.0, 1.2, out_box=BoxDomain.centered(5, 1))
    assert np.allclose(out.values, 1.0)


def test_empty_annulus():
    with pytest.raises(EmptyAnnulusError):
        annulus_points(1, 1.5, 0.2)


def test_annulus_comparison_constant_is_finite():
    f = random_indicator(BoxDomain((0,) * 5, 8), 0.2, 9)
    assert 0 < annulus_comparison_constant(f, 9) < math.inf


def test_maximal_single_radius_equals_spherical():
    f = random_indicator(BoxDomain.centered(5, 3), 0.2, 5)
    res = maximal_average(f, RadiusSet.of([6]))
    assert np.allclose(res.output.values, spherical_average(f, 6).values, atol=1e-14)
    assert np.all(res.radius_meta == 6)


def test_maximal_of_point_mass():
    box = BoxDomain.centered(5, 3)
    res = maximal_average(LatticeFunction.delta(box), RadiusSet.upto(9))
    pts = box.points()
    norms = (pts**2).sum(axis=1)
    vals = res.output.values.reshape(-1)
    hit = (norms >= 1) & (norms <= 9)
    assert np.allclose(vals[hit], norms[hit] ** -1.5, rtol=1e-14)
    assert np.all(vals[~hit] == 0)


def test_maximal_monotone_in_radius_set():
    f = random_indicator(BoxDomain.centered(5, 3), 0.2, 6)
    small = maximal_average(f, RadiusSet.of([2, 5])).output.values
    big = maximal_average(f, RadiusSet.of([2, 3, 5, 8])).output.values
    assert np.all(big >= small - 1e-12)


def test_argmax_ties_break_to_smallest_radius():
    box = BoxDomain.centered(5, 2)
    res = maximal_average(LatticeFunction.zeros(box), RadiusSet.of([3, 4, 7]))
    assert np.all(res.radius_meta == 3)


def _histogram_oracle(f, xs, m_max, w, allowed, lo, hi, mode):
    ys, yv = f.support()
    out_v, out_a = [], []
    for i, x in enumerate(xs):
        m = ((ys - x) ** 2).sum(axis=1)
        hist = np.bincount(m[m <= m_max], weights=yv[m <= m_max], minlength=m_max + 1)
        ms = [k for k in range(lo[i], hi[i] + 1) if allowed[k]]
        vals = [w[k] * hist[k] for k in ms]
        if mode == _kernels.MODE_SUM:
            out_v.append(sum(vals))
        else:
            j = int(np.argmax(vals)) if vals else None
            out_v.append(vals[j] if vals else 0.0)
            out_a.append(ms[j] if vals else -1)
    return np.array(out_v), np.array(out_a)


@pytest.mark.parametrize("d", [1, 2, 3, 5])
@pytest.mark.parametrize("route", ["pair", "split"])
@pytest.mark.parametrize("mode", [_kernels.MODE_MAX, _kernels.MODE_SUM])
def test_kernel_routes_match_histogram_oracle(d, route, mode):
    side = {1: 40, 2: 12, 3: 7, 5: 4}[d]
    box = BoxDomain((-(side // 2),) * d, side)
    rng = np.random.default_rng(d)
    f = LatticeFunction(box, rng.random(box.shape) * (rng.random(box.shape) < 0.4))
    xs = box.points()[rng.choice(box.volume, size=min(60, box.volume), replace=False)]
    m_max = 12
    w = np.r_[0.0, np.arange(1, m_max + 1) ** -0.7]
    allowed = np.zeros(m_max + 1, dtype=bool)
    allowed[[1, 2, 4, 5, 8, 9, 12]] = True
    lo = rng.integers(0, 6, size=len(xs))
    hi = lo + rng.integers(0, 8, size=len(xs))
    v, a = _kernels.shell_reduce(f.values, box.corner, xs, m_max, w, allowed, lo, hi, mode, route=route)
    ov, oa = _histogram_oracle(f, xs, m_max, w, allowed, lo, np.minimum(hi, m_max), mode)
    assert np.allclose(v, ov, atol=1e-12)
    if mode == _kernels.MODE_MAX:
        assert np.array_equal(a, oa)


def test_constant_stopping_time_is_spherical():
    f = random_indicator(BoxDomain((0,) * 5, 8), 0.2, 7)
    tau = StoppingTime.constant(f.domain, 5)
    assert np.allclose(stopping_time_average(f, tau).values, spherical_average(f, 5).values)


def test_argmax_stopping_time_reproduces_maximal():
    f = random_indicator(BoxDomain((0,) * 5, 8), 0.2, 8)
    radii = RadiusSet.upto(12)
    res = maximal_average(f, radii)
    tau = StoppingTime(f.domain, res.radius_meta)
    assert np.allclose(stopping_time_average(f, tau).values, res.output.values, atol=1e-14)


def test_stopping_time_below_maximal():
    f = random_indicator(BoxDomain((0,) * 5, 8), 0.2, 9)
    rng = np.random.default_rng(0)
    tau = StoppingTime(f.domain, rng.integers(1, 13, size=f.domain.shape))
    assert np.all(stopping_time_average(f, tau).values <= maximal_average(f, RadiusSet.upto(12)).output.values + 1e-14)


def test_stopping_time_snaps_down():
    box = BoxDomain((0,), 3)
    t = StoppingTime.from_radii(box, [1.0, 1.5, 2.9])
    assert list(t.tau_sq) == [1, 2, 8]
    t = StoppingTime.from_radii(box, [1.0, 1.5, 2.9], radii=RadiusSet.of([1, 4]))
    assert list(t.tau_sq) == [1, 1, 4]


def test_stopping_time_average_snaps_to_radius_set():
    f = random_indicator(BoxDomain((0,) * 5, 4), 0.5, 1)
    tau = StoppingTime.constant(f.domain, 3)
    out = stopping_time_average(f, tau, radii=RadiusSet.of([1, 2]))
    assert np.allclose(out.values, spherical_average(f, 2).values)


def test_admissible_tau_trivial_cases():
    E = DyadicCube(3, 3, (0, 0, 0))
    for f in (LatticeFunction.zeros(E.box), LatticeFunction.ones(E.box)):
        # no dense subcubes: the largest choice is l(E), the smallest is 1
        for extreme, expected in (("max", 64), ("min", 1)):
            tau = make_admissible_tau(f, E, 2.0, extreme=extreme)
            assert np.all(tau.tau_sq == expected)
            assert is_admissible(tau, f, E, 2.0)


def test_admissible_tau_with_dense_subcube():
    # f = 1 on a 2x2x2 dyadic cube inside a side-16 cube; density ratio 512
    E = DyadicCube(3, 4, (0, 0, 0))
    Q0 = DyadicCube(3, 1, (4, 8, 2))
    f = LatticeFunction.from_points(E.box, Q0.box.points())
    C = 10.0
    dense = dense_cubes_exhaustive(f.values, E.corner, E.side, C)
    assert dense  # Q0 and its ancestors up to the density threshold
    tau = make_admissible_tau(f, E, C, extreme="min")
    assert is_admissible(tau, f, E, C)
    for side, corner in dense:
        sl = tuple(slice(c, c + side) for c in corner)
        assert tau.tau_sq[sl].min() > side * side
    # lowering tau on a dense cube breaks admissibility
    side, corner = max(dense)
    bad = tau.tau_sq.copy()
    bad[tuple(corner)] = side * side
    assert not is_admissible(StoppingTime(E.box, bad), f, E, C)


def test_presparse_floor_on_middle_third():
    E = DyadicCube(2, 4, (0, 0))
    f = LatticeFunction.from_points(E.box, DyadicCube(2, 2, (4, 4)).box.points())
    tau = make_admissible_tau(f, E, 4.0, mode=PRESPARSE, extreme="min")
    assert tau.mode == PRESPARSE and is_admissible(tau, f, E, 4.0)
    pts = E.box.points()
    for Q in stopping_cubes(f, E, 4.0):
        inside = in_third(Q, pts)
        assert np.all(tau.tau_sq.reshape(-1)[inside] >= max(1, Q.side**2))


def test_in_third_is_middle_block():
    Q = DyadicCube(1, 3, (8,))
    pts = np.arange(8, 16)[:, None]
    # cell centres within distance 8/6 of the centre 12
    assert list(pts[in_third(Q, pts)].reshape(-1)) == [11, 12]


def test_stopping_time_modes_validated():
    box = BoxDomain((0,), 2)
    with pytest.raises(ValueError):
        StoppingTime(box, [1, 1], mode="other")
    with pytest.raises(ValueError):
        StoppingTime(box, [0, 1])
    assert StoppingTime(box, [1, 4], DENSITY).tau.tolist() == [1.0, 2.0]


def test_shell_maximum_window():
    f = random_indicator(BoxDomain((0,) * 5, 6), 0.3, 11)
    xs = f.domain.points()[:50]
    radii = RadiusSet.upto(10)
    full, _ = shell_maximum(f, xs, radii)
    windowed, arg = shell_maximum(f, xs, radii, lo=3, hi=6)
    assert np.all(windowed <= full + 1e-12)
    assert np.all((arg >= 3) & (arg <= 6))
