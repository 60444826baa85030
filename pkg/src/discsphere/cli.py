"""Command line entry point: ``discsphere <subcommand> [flags]``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from .errors import CapacityError, RecursionDepthError, ToleranceError
from .runner import RunConfig, run

EXIT_OK, EXIT_USAGE, EXIT_CAPACITY, EXIT_TOLERANCE = 0, 2, 3, 4

# flags each subcommand cannot run without (checked after merging the config file)
REQUIRED = {
    "spheres": ("dim", "max_m"),
    "ramanujan": ("Q", "k", "M", "eps"),
    "gauss": ("dim", "q", "a"),
    "average": ("kind", "dim", "box", "radii"),
    "multiplier": ("dim",),
    "certify": ("dim", "side", "density_f", "density_g", "inv_p", "inv_q"),
    "region": ("dim",),
    "counterexample": ("dim", "lambda_sq_list"),
    "necessity": ("dim", "inv_p", "inv_q", "lambda_sq_list"),
    "delta-decay": ("dim", "R"),
}
META = ("command", "config", "seed", "outdir", "verbose")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="key = value file; flags given on the command line win")
    p.add_argument("--seed", type=int, help="64-bit seed for random inputs (default 0)")
    p.add_argument("--outdir", type=Path, help="output directory (default ./out)")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="discsphere", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("spheres", help="shell counts r_d(m)")
    p.add_argument("--dim", type=int)
    p.add_argument("--max-m", type=int)
    p.add_argument("--list", action="store_true", help="also write every shell point")

    p = sub.add_parser("ramanujan", help="Ramanujan block bound report")
    p.add_argument("--Q", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--M", type=int)
    p.add_argument("--eps", type=float)

    p = sub.add_parser("gauss", help="normalized Gauss sums over Z_q^d")
    p.add_argument("--dim", type=int)
    p.add_argument("--q", type=int)
    p.add_argument("--a", type=int)
    p.add_argument("--verify-fourier", action="store_true")

    p = sub.add_parser("average", help="sphere, ball, annulus or maximal averages on a box")
    p.add_argument("--kind", choices=("sphere", "ball", "annulus", "maximal"))
    p.add_argument("--dim", type=int)
    p.add_argument("--box", type=int, help="side of the box centered at the origin")
    p.add_argument("--radii", help="comma-separated squared radii")
    p.add_argument("--input", type=Path, help="CSV of coordinates then value, with header")
    p.add_argument("--density", type=float, help="random indicator density when no input is given")
    p.add_argument("--width", type=float, help="annulus width (default 1)")

    p = sub.add_parser("multiplier", help="discrete, main-term or error multiplier on a torus grid")
    p.add_argument("--dim", type=int)
    p.add_argument("--lambda-sq", type=int)
    p.add_argument("--grid", type=int)
    p.add_argument("--q-max", type=int)
    p.add_argument("--symbol", choices=("discrete", "main", "error"))
    p.add_argument("--axes", help="comma-separated varying axes (default all)")
    p.add_argument("--error-decay", help="comma-separated squared radii for the decay report")

    p = sub.add_parser("certify", help="empirical sparse constant on random indicators")
    p.add_argument("--dim", type=int)
    p.add_argument("--side", type=int)
    p.add_argument("--density-f", type=float)
    p.add_argument("--density-g", type=float)
    p.add_argument("--inv-p")
    p.add_argument("--inv-q")
    p.add_argument("--C", type=float)
    p.add_argument("--max-radius-sq", type=int)

    p = sub.add_parser("region", help="exact vertices of the exponent region")
    p.add_argument("--dim", type=int)
    p.add_argument("--family", choices=("R", "Z"))

    p = sub.add_parser("counterexample", help="sphere-indicator level set sizes")
    p.add_argument("--dim", type=int)
    p.add_argument("--lambda-sq-list")
    p.add_argument("--c", help="AUTO or a positive threshold")
    p.add_argument("--axis-only", action="store_true", help="skip the full-box count")

    p = sub.add_parser("necessity", help="implied constants across radii")
    p.add_argument("--dim", type=int)
    p.add_argument("--inv-p")
    p.add_argument("--inv-q")
    p.add_argument("--lambda-sq-list")
    p.add_argument("--c")

    p = sub.add_parser("delta-decay", help="maximal response to a point mass")
    p.add_argument("--dim", type=int)
    p.add_argument("--R", type=int)

    for p in sub.choices.values():
        _common(p)
    return parser


def read_config(path: Path) -> dict:
    """Parse ``key = value`` lines; blank lines and ``#`` comments are skipped."""
    out = {}
    for n, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{n}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _merge(parser: argparse.ArgumentParser, args: argparse.Namespace) -> RunConfig:
    params = {k: v for k, v in vars(args).items() if k not in META}
    seed, outdir = args.seed, args.outdir
    if args.config is not None:
        try:
            file_cfg = read_config(args.config)
        except (OSError, ValueError) as exc:
            parser.error(str(exc))
        sub = parser._subparsers._group_actions[0].choices[args.command]
        actions = {a.dest: a for a in sub._actions}
        for key, raw in file_cfg.items():
            if key not in actions or key in ("config", "help", "verbose"):
                parser.error(f"unknown config key {key!r} for {args.command}")
            action = actions[key]
            if isinstance(action, argparse._StoreTrueAction):
                value = raw.lower() in ("1", "true", "yes", "on")
            else:
                try:
                    value = action.type(raw) if action.type else raw
                except (TypeError, ValueError):
                    parser.error(f"bad value for {key}: {raw!r}")
                if action.choices and value not in action.choices:
                    parser.error(f"bad value for {key}: {raw!r}")
            if key == "seed":
                seed = value if seed is None else seed
            elif key == "outdir":
                outdir = value if outdir is None else outdir
            elif params.get(key) in (None, False):
                params[key] = value
    missing = [k for k in REQUIRED[args.command] if params.get(k) is None]
    if missing:
        parser.error(f"{args.command}: missing " + ", ".join("--" + k.replace("_", "-") for k in missing))
    seed = 0 if seed is None else seed
    if not 0 <= seed < 2**64:
        parser.error("seed must be a 64-bit unsigned integer")
    return RunConfig(args.command, params, seed, Path("out") if outdir is None else outdir)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        config = _merge(parser, args)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        manifest = run(config)
    except CapacityError as exc:
        print(f"capacity error in {config.command}: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except ToleranceError as exc:
        print(f"tolerance failure in {config.command}: {exc}", file=sys.stderr)
        return EXIT_TOLERANCE
    except RecursionDepthError as exc:
        print(f"recursion error in {config.command}: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except (ValueError, OSError) as exc:
        print(f"{config.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    for f in manifest.files:
        print(f"{f['sha256']}  {f['path']}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
