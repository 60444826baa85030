"""Run configuration, seeded inputs, deterministic output files and run manifests."""

from __future__ import annotations

import csv
import hashlib
import json
import math
import platform
import time
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .arithmetic import gauss_table, ramanujan_bound_report, verify_gauss_fourier
from .errors import ToleranceError
from .experiments import (
    delta_decay_experiment,
    growth_table,
    necessity_scan,
    sphere_set_experiment,
)
from .lattice import BoxDomain, LatticeFunction, RadiusSet, enumerate_sphere, representation_counts
from .multipliers import (
    TorusGrid,
    discrete_sphere_multiplier,
    error_multiplier_norm,
    error_multiplier_sample,
    main_term_values,
    sphere_mass,
)
from .operators import annulus_average, ball_average, maximal_average, spherical_average
from .sparse import certify_constant, region_vertices

RNG_NAME = "numpy.random.Philox"
FOURIER_TOL = 1e-9
MANIFEST = "manifest.json"


@dataclass
class RunConfig:
    command: str
    params: dict
    seed: int = 0
    outdir: Path = Path("out")

    def echo(self) -> dict:
        return {"command": self.command, "params": _jsonable(self.params), "seed": self.seed}


@dataclass
class RunManifest:
    config: dict
    version: str
    wall_time: float
    rng: str
    files: list[dict] = field(default_factory=list)
    environment: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------------------
# random inputs
# ---------------------------------------------------------------------------

def make_rng(seed) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def generate_indicator(domain: BoxDomain, density: float, seed) -> LatticeFunction:
    """Indicator whose points are kept independently with probability ``density``."""
    if not 0 < density <= 1:
        raise ValueError("density must lie in (0, 1]")
    keep = make_rng(seed).random(domain.shape) < density
    return LatticeFunction(domain, keep.astype(np.float64), indicator=True)


def indicator_pair(domain: BoxDomain, density_f: float, density_g: float, seed: int):
    """Independent indicators f, g from two children of one seed."""
    sf, sg = np.random.SeedSequence(seed).spawn(2)
    return generate_indicator(domain, density_f, sf), generate_indicator(domain, density_g, sg)


# ---------------------------------------------------------------------------
# deterministic writers
# ---------------------------------------------------------------------------

def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, Path):
        return str(obj)
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return _jsonable(float(obj))
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


class OutputDir:
    """Writes files only inside one directory and remembers what it wrote."""

    def __init__(self, root: Path):
        self.root = Path(root).resolve()
        self.written: list[Path] = []

    def path(self, name: str) -> Path:
        p = (self.root / name).resolve()
        if self.root not in p.parents:
            raise ValueError(f"refusing to write outside the output directory: {name}")
        return p

    def json(self, name: str, obj) -> Path:
        p = self.path(name)
        p.parent.mkdir(parents=True, exist_ok=True)
        text = json.dumps(_jsonable(obj), sort_keys=True, indent=2, ensure_ascii=False)
        p.write_text(text + "\n", encoding="utf-8")
        self.written.append(p)
        return p

    def csv(self, name: str, header, rows) -> Path:
        p = self.path(name)
        p.parent.mkdir(parents=True, exist_ok=True)
        with p.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_cell(v) for v in row])
        self.written.append(p)
        return p


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return int(v)
    if v is None:
        return ""
    return v


def sha256(path: Path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _int_list(v) -> list[int]:
    if isinstance(v, (list, tuple)):
        return [int(x) for x in v]
    return [int(x) for x in str(v).split(",") if x.strip()]


def _spheres(p, seed, out: OutputDir):
    d, M = int(p["dim"]), int(p["max_m"])
    counts = representation_counts(d, M)[: M + 1]
    out.csv("spheres.csv", ["m", "count"], [(m, c) for m, c in enumerate(counts)])
    if p.get("list"):
        rows = []
        for m in range(M + 1):
            rows.extend([m, *map(int, pt)] for pt in enumerate_sphere(d, m).points)
        out.csv("sphere_points.csv", ["m"] + [f"n{i + 1}" for i in range(d)], rows)


def _ramanujan(p, seed, out: OutputDir):
    rep = ramanujan_bound_report(int(p["Q"]), int(p["k"]), int(p["M"]), float(p["eps"]))
    out.json("ramanujan.json", rep.to_dict())


def _gauss(p, seed, out: OutputDir):
    d, q, a = int(p["dim"]), int(p["q"]), int(p["a"])
    table = gauss_table(d, a, q)
    ells = np.indices(table.shape).reshape(d, -1).T
    vals = table.reshape(-1)
    out.csv("gauss.csv", [f"l{i + 1}" for i in range(d)] + ["re", "im"],
            ([*map(int, e), v.real, v.imag] for e, v in zip(ells, vals)))
    if p.get("verify_fourier"):
        err = verify_gauss_fourier(d, a, q)
        out.json("gauss_fourier.json", {"dim": d, "q": q, "a": a, "max_error": err, "tolerance": FOURIER_TOL})
        if err >= FOURIER_TOL:
            raise ToleranceError(f"Fourier check error {err} exceeds {FOURIER_TOL}")


def _read_points(path, d: int):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] != d + 1:
        raise ValueError(f"input rows need {d} coordinates and a value")
    return data[:, :d].astype(np.int64), data[:, d]


def _average(p, seed, out: OutputDir):
    d, side = int(p["dim"]), int(p["box"])
    box = BoxDomain((-(side // 2),) * d, side)
    if p.get("input"):
        pts, vals = _read_points(p["input"], d)
        keep = box.contains(pts)
        f = LatticeFunction.from_points(box, pts[keep], vals[keep])
    else:
        f = generate_indicator(box, float(p.get("density") or 0.1), seed)
    radii = _int_list(p["radii"])
    kind = p["kind"]
    meta = None
    if kind == "sphere":
        res = spherical_average(f, radii[0])
    elif kind == "ball":
        res = ball_average(f, math.sqrt(radii[0]))
    elif kind == "annulus":
        res = annulus_average(f, math.sqrt(radii[0]), float(p.get("width") or 1.0))
    elif kind == "maximal":
        r = maximal_average(f, RadiusSet.of(radii))
        res, meta = r.output, r.radius_meta.reshape(-1)
    else:
        raise ValueError(f"unknown average kind {kind!r}")
    pts = box.points()
    vals = res.values.reshape(-1)
    header = [f"x{i + 1}" for i in range(d)] + ["value"] + (["argmax_radius_sq"] if meta is not None else [])
    rows = ([*map(int, x), v] + ([int(meta[i])] if meta is not None else []) for i, (x, v) in enumerate(zip(pts, vals)))
    out.csv("average.csv", header, rows)


def _multiplier(p, seed, out: OutputDir):
    d = int(p["dim"])
    axes = tuple(_int_list(p["axes"])) if p.get("axes") else None
    if p.get("error_decay"):
        rep = error_multiplier_norm(d, _int_list(p["error_decay"]), resolution=p.get("grid"), axes=axes or (0, 1))
        out.json("error_decay.json", rep.to_dict())
        return
    m = int(p["lambda_sq"])
    grid = TorusGrid(d, int(p.get("grid") or math.ceil(4 * math.sqrt(m))), axes)
    q_max = int(p.get("q_max") or math.isqrt(m))
    symbol = p.get("symbol") or "discrete"
    if symbol == "discrete":
        vals = discrete_sphere_multiplier(d, m, grid).values.reshape(-1)
    elif symbol == "main":
        vals = main_term_values(d, m, grid.points(), q_max, mass=sphere_mass(d))
    elif symbol == "error":
        vals = error_multiplier_sample(d, m, grid, q_max).values.reshape(-1)
    else:
        raise ValueError(f"unknown symbol {symbol!r}")
    xi = grid.points()
    out.csv("multiplier.csv", [f"xi{i + 1}" for i in range(d)] + ["re", "im"],
            ([*x, v.real, v.imag] for x, v in zip(xi, vals)))


def _certify(p, seed, out: OutputDir):
    d, side = int(p["dim"]), int(p["side"])
    box = BoxDomain((0,) * d, side)
    f, g = indicator_pair(box, float(p["density_f"]), float(p["density_g"]), seed)
    radii = RadiusSet.upto(int(p["max_radius_sq"])) if p.get("max_radius_sq") else None
    rep = certify_constant(f, g, _fraction(p["inv_p"]), _fraction(p["inv_q"]), radii=radii,
                           C=float(p["C"]) if p.get("C") else None)
    out.json("certify.json", rep.to_dict())


def _fraction(v) -> Fraction:
    return Fraction(str(v)).limit_denominator(10**6)


def _region(p, seed, out: OutputDir):
    poly = region_vertices(int(p["dim"]), p.get("family") or "Z")
    out.csv("region.csv", ["vertex", "inv_p", "inv_q"],
            ([i, str(x), str(y)] for i, (x, y) in enumerate(poly.vertices)))


def _c_value(v):
    if v is None or str(v).upper() == "AUTO":
        return None
    return float(v)


def _merge_growth(out: OutputDir, rows: list[dict]) -> None:
    path = out.path("growth.csv")
    merged = {}
    if path.exists():
        with path.open(encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                merged[float(row["lambda"])] = row
    for row in rows:
        merged[float(row["lambda"])] = {k: row[k] for k in ("lambda", "axis_count", "G_count", "box_side")}
    header = ["lambda", "axis_count", "G_count", "box_side"]
    ordered = [merged[k] for k in sorted(merged)]
    out.csv("growth.csv", header, ([r[h] if r[h] != "" else None for h in header] for r in ordered))


def _counterexample(p, seed, out: OutputDir):
    d = int(p["dim"])
    reps = [sphere_set_experiment(d, m, _c_value(p.get("c")), measure_full=not p.get("axis_only"))
            for m in _int_list(p["lambda_sq_list"])]
    out.json("counterexample.json", {"reports": [r.to_dict() for r in reps]})
    _merge_growth(out, growth_table(reps))


def _necessity(p, seed, out: OutputDir):
    rep = necessity_scan(int(p["dim"]), _int_list(p["lambda_sq_list"]), float(_fraction(p["inv_p"])),
                         float(_fraction(p["inv_q"])), _c_value(p.get("c")))
    out.json("necessity.json", rep.to_dict())


def _delta_decay(p, seed, out: OutputDir):
    rep = delta_decay_experiment(int(p["dim"]), int(p["R"]))
    out.json("delta_decay.json", rep.to_dict())


HANDLERS = {
    "spheres": _spheres,
    "ramanujan": _ramanujan,
    "gauss": _gauss,
    "average": _average,
    "multiplier": _multiplier,
    "certify": _certify,
    "region": _region,
    "counterexample": _counterexample,
    "necessity": _necessity,
    "delta-decay": _delta_decay,
}


def run(config: RunConfig) -> RunManifest:
    """Dispatch one subcommand, write its outputs, then write the manifest last."""
    if config.command not in HANDLERS:
        raise ValueError(f"unknown subcommand {config.command!r}")
    t0 = time.perf_counter()
    out = OutputDir(config.outdir)
    out.root.mkdir(parents=True, exist_ok=True)
    HANDLERS[config.command](config.params, config.seed, out)
    files = [
        {"path": str(p.relative_to(out.root)), "sha256": sha256(p), "bytes": p.stat().st_size}
        for p in sorted(set(out.written))
    ]
    manifest = RunManifest(
        config=config.echo(),
        version=__version__,
        wall_time=time.perf_counter() - t0,
        rng=RNG_NAME,
        files=files,
        environment={"python": platform.python_version(), "numpy": np.__version__},
    )
    text = json.dumps(_jsonable(manifest.to_dict()), sort_keys=True, indent=2)
    (out.root / MANIFEST).write_text(text + "\n", encoding="utf-8")
    return manifest
