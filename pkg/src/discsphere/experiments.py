"""Counterexample experiments, necessity scans and the endpoint budget selector."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np

from .lattice import BoxDomain, LatticeFunction, RadiusSet, enumerate_sphere, representation_count
from .operators import maximal_average

log = logging.getLogger(__name__)

FULL_BOX_CAP = 200_000


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    residual: float  # root-mean-square residual in log space
    samples: int

    @classmethod
    def loglog(cls, x, y) -> "FitResult":
        lx, ly = np.log(np.asarray(x, dtype=np.float64)), np.log(np.asarray(y, dtype=np.float64))
        if len(lx) < 2:
            return cls(math.nan, math.nan, math.nan, len(lx))
        slope, intercept = np.polyfit(lx, ly, 1)
        res = ly - (slope * lx + intercept)
        return cls(float(slope), float(intercept), float(np.sqrt(np.mean(res**2))), len(lx))


@dataclass
class ExperimentReport:
    name: str
    parameters: dict
    measured: dict
    fits: dict = field(default_factory=dict)
    runtime: float = 0.0

    def to_dict(self, include_runtime: bool = False) -> dict:
        out = {
            "name": self.name,
            "parameters": self.parameters,
            "measured": self.measured,
            "fits": {k: asdict(v) for k, v in self.fits.items()},
        }
        if include_runtime:
            out["runtime"] = self.runtime
        return out


def rerun(report: ExperimentReport) -> ExperimentReport:
    """Re-run an experiment from its own parameter block."""
    return EXPERIMENTS[report.name](**report.parameters)


def _require_dim(d: int) -> None:
    if d < 5:
        raise ValueError("the counterexamples need d >= 5")


# ---------------------------------------------------------------------------
# point mass
# ---------------------------------------------------------------------------

def weak_quasinorm(values: np.ndarray, exponent: float) -> float:
    """sup_t t |{v > t}|^(1/exponent) for a finite list of nonnegative values.

    The supremum is approached as t increases to a value v from below, where
    the level set is {values >= v}; ties are therefore counted in full.
    """
    v = np.sort(np.asarray(values, dtype=np.float64)[values > 0])[::-1]
    if not len(v):
        return 0.0
    # number of entries >= v_k, ties included
    counts = np.searchsorted(-v, -v, side="right")
    return float(np.max(v * counts ** (1.0 / exponent)))


def _delta_response(d: int, R: int) -> tuple[BoxDomain, np.ndarray]:
    box = BoxDomain.centered(d, R)
    f = LatticeFunction.delta(box)
    res = maximal_average(f, RadiusSet.upto(4 * R * R))
    return box, res.output.values.reshape(-1)


def delta_decay_experiment(d: int, R: int) -> ExperimentReport:
    """Maximal response to a point mass on the box of radius R, radii up to 2R."""
    _require_dim(d)
    t0 = time.perf_counter()
    box, vals = _delta_response(d, R)
    pts = box.points()
    norm = np.sqrt((pts.astype(np.float64) ** 2).sum(axis=1))
    pos = vals > 0
    fit = FitResult.loglog(1.0 + norm[pos], vals[pos])
    exponent = d / (d - 2)
    measured = {
        "points": int(pos.sum()),
        "max_value": float(vals.max()),
        "weak_quasinorm": weak_quasinorm(vals, exponent),
        "weak_exponent": exponent,
        "target_slope": 2 - d,
    }
    return ExperimentReport("delta_decay", {"d": d, "R": R}, measured, {"decay": fit}, time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# sphere indicator
# ---------------------------------------------------------------------------

def axis_counts(d: int, lambda_sq: int) -> list[dict]:
    """Exact overlap counts #{y in S_lambda : |x - y|^2 = lambda^2 + x1^2} at x = (x1, 0, ..., 0)."""
    shell = enumerate_sphere(d, lambda_sq).points
    half = math.isqrt(lambda_sq) // 2
    out = []
    for x1 in range(-half, half + 1):
        x = np.zeros(d, dtype=np.int64)
        x[0] = x1
        m = lambda_sq + x1 * x1
        hits = int(np.count_nonzero(((x - shell) ** 2).sum(axis=1) == m))
        out.append({"x1": x1, "radius_sq": m, "count": hits, "value": hits * float(m) ** ((2 - d) / 2)})
    return out


def sphere_set_experiment(d: int, lambda_sq: int, c: float | None = None, measure_full: bool = True,
                          box_cap: int = FULL_BOX_CAP) -> ExperimentReport:
    """G = {A 1_{S_lambda} > c / lambda}: certified axis points and, where feasible, the full count."""
    _require_dim(d)
    if lambda_sq % 2 == 0:
        raise ValueError("lambda^2 must be odd")
    t0 = time.perf_counter()
    lam = math.sqrt(lambda_sq)
    axis = axis_counts(d, lambda_sq)
    sub = representation_count(d - 1, lambda_sq)
    scaled = [lam * a["value"] for a in axis]
    c_used = 0.5 * min(scaled) if c is None else float(c)
    certified = [a for a, s in zip(axis, scaled) if s > c_used]
    measured = {
        "lambda": lam,
        "c": c_used,
        "sub_sphere_count": sub,
        "axis_points": len(axis),
        "axis_count": len(certified),
        "axis_floor": math.isqrt(lambda_sq) // 2,
        "axis": axis,
        "ceiling": lam ** ((d + 4) / 2),
    }
    R = math.isqrt(lambda_sq)
    box = BoxDomain.centered(d, R)
    measured["box_side"] = box.side
    if measure_full and box.volume <= box_cap:
        f = LatticeFunction.from_points(box, enumerate_sphere(d, lambda_sq).points)
        res = maximal_average(f, RadiusSet.upto(9 * lambda_sq))
        vals = res.output.values
        measured["G_count"] = int(np.count_nonzero(vals > c_used / lam))
        measured["G_within_ceiling"] = measured["G_count"] <= measured["ceiling"]
        measured["full_measured"] = True
    else:
        measured["G_count"] = None
        measured["full_measured"] = False
        log.info("full |G| skipped at lambda^2=%d: box volume %d exceeds cap %d", lambda_sq, box.volume, box_cap)
    params = {"d": d, "lambda_sq": lambda_sq, "c": c, "measure_full": measure_full, "box_cap": box_cap}
    return ExperimentReport("sphere_set", params, measured, {}, time.perf_counter() - t0)


def growth_table(reports: list[ExperimentReport]) -> list[dict]:
    """Rows lambda, axis_count, G_count, box_side merged by lambda."""
    rows = [
        {"lambda": r.measured["lambda"], "axis_count": r.measured["axis_count"],
         "G_count": r.measured["G_count"], "box_side": r.measured["box_side"]}
        for r in reports
    ]
    return sorted(rows, key=lambda row: row["lambda"])


# ---------------------------------------------------------------------------
# necessary conditions
# ---------------------------------------------------------------------------

def necessary_condition(d: int, inv_p, inv_q) -> bool:
    """2/p + (d-1)/q <= d, exactly."""
    return 2 * _rational(inv_p) + (d - 1) * _rational(inv_q) <= d


def _rational(v) -> Fraction:
    """Exact value of an exponent given as a Fraction, int, float or string like '29/50'."""
    return Fraction(str(v)).limit_denominator(10**6)


def _strictly_increasing(v) -> bool:
    return all(b > a for a, b in zip(v, v[1:]))


def necessity_scan(d: int, lambda_sq_list, inv_p, inv_q, c: float | None = None,
                   measure_full: bool = False, delta_radii=(4, 6, 8)) -> ExperimentReport:
    """Implied constant lambda^-1 <1_G>_E / (lambda^(-2/p) <1_G>_E^(1/q)) per radius."""
    _require_dim(d)
    t0 = time.perf_counter()
    exact_p, exact_q = _rational(inv_p), _rational(inv_q)
    ip, iq = float(exact_p), float(exact_q)
    rows = []
    for m in sorted(lambda_sq_list):
        rep = sphere_set_experiment(d, m, c, measure_full=measure_full)
        lam = rep.measured["lambda"]
        E = rep.measured["box_side"] ** d
        row = {"lambda_sq": m, "lambda": lam, "E": E}
        for key in ("axis_count", "G_count"):
            G = rep.measured[key]
            if G is None or G == 0:
                row[f"constant_{key}"] = None
                continue
            dens = G / E
            lhs = dens / lam
            rhs = lam ** (-2 * ip) * dens**iq
            row[f"constant_{key}"] = lhs / rhs
        rows.append(row)
    consts = [r["constant_axis_count"] for r in rows]
    fit = FitResult.loglog([r["lambda"] for r in rows], consts)
    grows = bool(fit.slope > 0 and _strictly_increasing(consts))
    measured = {
        "rows": rows,
        "predicted_exponent": 2 * ip + (d - 1) * iq - d,
        "necessary_condition_holds": necessary_condition(d, exact_p, exact_q),
        "constant_grows": grows,
    }
    fits = {"constant": fit}

    # point-mass path: A maps l^p to weak l^p only for 1/p <= (d-2)/d
    if ip > (d - 2) / d:
        norms = []
        for R in delta_radii:
            _, vals = _delta_response(d, R)
            norms.append(weak_quasinorm(vals, 1.0 / ip))
        dfit = FitResult.loglog(list(delta_radii), norms)
        measured["delta_weak_norms"] = norms
        measured["delta_divergence"] = bool(dfit.slope > 0 and _strictly_increasing(norms))
        fits["delta_weak_norm"] = dfit
    else:
        measured["delta_weak_norms"] = None
        measured["delta_divergence"] = False
    params = {"d": d, "lambda_sq_list": list(lambda_sq_list), "inv_p": ip, "inv_q": iq, "c": c,
              "measure_full": measure_full, "delta_radii": list(delta_radii)}
    return ExperimentReport("necessity", params, measured, fits, time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# endpoint budget
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EndpointBudget:
    N: int
    raw: float
    growth_budget: float  # N^2 <f><g>
    decay_budget: float  # N^(-(d-4)/2) (<f><g>)^(1/2)

    @property
    def ratio(self) -> float:
        hi, lo = max(self.growth_budget, self.decay_budget), min(self.growth_budget, self.decay_budget)
        return hi / lo


def endpoint_budget(avg_f: float, avg_g: float, d: int) -> EndpointBudget:
    """N = round((<f><g>)^(-1/d)), at least 2, with the two competing budgets."""
    if not (0 < avg_f <= 1 and 0 < avg_g <= 1):
        raise ValueError("densities must lie in (0, 1]")
    prod = avg_f * avg_g
    raw = prod ** (-1.0 / d)
    N = max(2, int(math.floor(raw + 0.5)))
    return EndpointBudget(N, raw, N * N * prod, N ** (-(d - 4) / 2) * math.sqrt(prod))


EXPERIMENTS = {
    "delta_decay": delta_decay_experiment,
    "sphere_set": sphere_set_experiment,
    "necessity": necessity_scan,
}
