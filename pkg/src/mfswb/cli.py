"""Command-line experiment harness: ``mfswb {gauss,pointcloud,color,bench}``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import io
from .evaluation import ASSIGNMENT_CAP
from .experiments import COLOR_DEFAULTS, GAUSS_DEFAULTS, POINTCLOUD_DEFAULTS, run_color, run_gauss, run_pointcloud
from .objectives import METHODS, Method
from .optimizer import BarycenterConfig, DivergenceError

log = logging.getLogger("mfswb")

DEFAULT_LAMBDA = 1.0
# manifest key -> argparse dest
_MANIFEST_KEYS = {
    "method": "method",
    "lambda": "lam",
    "p": "p",
    "projections": "projections",
    "lr": "lr",
    "iters": "iters",
    "seed": "seed",
    "metrics_every": "metrics_every",
    "eval_cap": "eval_cap",
    "inputs": "inputs",
}


def _add_run_flags(sp: argparse.ArgumentParser, defaults) -> None:
    sp.add_argument("--method", choices=METHODS, default="uswb")
    sp.add_argument("--lambda", dest="lam", type=float, default=None,
                    help=f"fairness multiplier, mfswb only (default {DEFAULT_LAMBDA})")
    sp.add_argument("--p", type=float, default=2.0, help="Wasserstein order")
    sp.add_argument("--projections", type=int, default=defaults.L)
    sp.add_argument("--iters", type=int, default=defaults.iters)
    sp.add_argument("--lr", type=float, default=defaults.lr)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--metrics-every", dest="metrics_every", type=int, default=defaults.metrics_every)
    sp.add_argument("--eval-cap", dest="eval_cap", type=int, default=ASSIGNMENT_CAP)
    sp.add_argument("--out", type=Path, default=Path("out"))
    sp.add_argument("--manifest", type=Path, default=None,
                    help="rerun with every parameter taken from a previous run's manifest.json")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mfswb", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("gauss", help="barycenter of four 2D Gaussians")
    _add_run_flags(sp, GAUSS_DEFAULTS)

    sp = sub.add_parser("pointcloud", help="mean shape of two or more point clouds (XYZ or ASCII PLY)")
    sp.add_argument("inputs", nargs="*", type=Path)
    _add_run_flags(sp, POINTCLOUD_DEFAULTS)

    sp = sub.add_parser("color", help="harmonize a source image toward two or more target palettes")
    sp.add_argument("inputs", nargs="*", type=Path, help="SOURCE TARGET TARGET [...]")
    _add_run_flags(sp, COLOR_DEFAULTS)

    sp = sub.add_parser("bench", help="run the invariant suites and print a pass/fail table")
    sp.add_argument("--suite", action="append", choices=["sandwich", "gradient", "oracle", "mc-slope"])
    sp.add_argument("--cases", type=int, default=None)
    sp.add_argument("--seed", type=int, default=0)
    return parser


def _apply_manifest(args, parser) -> None:
    man = io.read_manifest(args.manifest)
    if man.get("subcommand") not in (None, args.command):
        parser.error(f"manifest is for {man['subcommand']!r}, not {args.command!r}")
    for key, dest in _MANIFEST_KEYS.items():
        if key in man:
            value = man[key]
            if dest == "inputs":
                value = [Path(v) for v in value]
            setattr(args, dest, value)
    if args.method != "mfswb":
        args.lam = None


def _config(args, defaults) -> BarycenterConfig:
    lam = DEFAULT_LAMBDA if args.lam is None else args.lam
    return BarycenterConfig(
        method=Method(args.method, lam if args.method == "mfswb" else 0.0),
        p=args.p,
        L=args.projections,
        lr=args.lr,
        iters=args.iters,
        seed=args.seed,
        metrics_every=args.metrics_every,
        checkpoints=tuple(c for c in defaults.checkpoints if c <= args.iters),
    )


def _bench(args) -> int:
    from .bench import run_suites

    results = run_suites(args.suite, args.cases, args.seed)
    width = max(len(r.name) for r in results)
    for r in results:
        status = "PASS" if r.ok else "FAIL"
        print(f"{r.name:<{width}}  {status}  {r.passed}/{r.total}  {r.detail}")
    return 0 if all(r.ok for r in results) else 1


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")

    if args.command == "bench":
        return _bench(args)

    if args.manifest is not None:
        _apply_manifest(args, parser)
    if args.lam is not None and args.method != "mfswb":
        parser.error("--lambda only applies to --method mfswb")

    defaults = {"gauss": GAUSS_DEFAULTS, "pointcloud": POINTCLOUD_DEFAULTS, "color": COLOR_DEFAULTS}[args.command]
    try:
        cfg = _config(args, defaults)
    except ValueError as exc:
        parser.error(str(exc))

    try:
        if args.command == "gauss":
            trace = run_gauss(cfg, args.out, args.eval_cap)
        elif args.command == "pointcloud":
            if len(args.inputs) < 2:
                parser.error("pointcloud needs at least two input clouds")
            clouds = [io.load_pointcloud(p) for p in args.inputs]
            trace = run_pointcloud(clouds, cfg, args.out, args.eval_cap, inputs=args.inputs)
        else:
            if len(args.inputs) < 3:
                parser.error("color needs a source image and at least two target images")
            source, _ = io.load_image_palette(args.inputs[0])
            targets = [io.load_image_palette(p)[1] for p in args.inputs[1:]]
            trace = run_color(source, targets, cfg, args.out, args.eval_cap, inputs=args.inputs)
    except DivergenceError as exc:
        print(f"mfswb: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"mfswb: error: {exc}", file=sys.stderr)
        return 1

    last = trace.records[-1]
    print(f"{args.command} {cfg.method.tag}: iteration {last.iteration} F={last.F:.6g} W={last.W:.6g} -> {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
