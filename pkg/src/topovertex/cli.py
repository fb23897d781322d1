"""Command-line interface: ``topovertex {scene,precompute,map,detect,validate}``.

Exit status is 0 on success, 1 on usage or input errors and 2 on numerical
failures (solver breakdown, failed validation).
"""

import argparse
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import __version__
from . import export
from . import grid_fem as fem
from . import polarization as pol
from . import scene as sc
from .detect import label_positions, run_detection
from .errors import (ConsistencyError, DimensionError, GeometryError, ParameterError,
                     ShapeDegeneracyError, SolverError, TopoVertexError)
from .exterior import build_graded_grid
from .inclusion import DEFAULT_WIDTH, build_inclusion, generate_theta, parse_shape_id
from .tdmap import eval_td1, eval_td2

log = logging.getLogger("topovertex")

DEFAULT_CACHE = os.environ.get("TOPOVERTEX_CACHE", ".topovertex-cache")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _floats(text):
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _ints(text):
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _add_params(p):
    g = p.add_argument_group("model parameters")
    g.add_argument("--alpha", type=float, default=8.0)
    g.add_argument("--lambda-in", type=float, default=0.05)
    g.add_argument("--lambda-out", type=float, default=1.0)
    g.add_argument("--w", type=float, default=DEFAULT_WIDTH, help="arm width of the inclusions")
    g.add_argument("--R", type=float, default=30.0, help="half-width of the truncated exterior box")
    g.add_argument("--h-f", type=float, default=0.0125, help="core spacing of the exterior grid")
    g.add_argument("--L-f", type=float, default=1.6, help="core half-width of the exterior grid")
    g.add_argument("--rho", type=float, default=1.2, help="growth factor of the exterior grid")
    g.add_argument("--cg-tol", type=float, default=1e-10)
    g.add_argument("--cache", default=DEFAULT_CACHE, help="polarization cache directory")
    g.add_argument("--recompute", action="store_true", help="ignore and overwrite cached entries")
    g.add_argument("--threads", type=int, default=os.cpu_count() or 1)


def _add_scene(p):
    p.add_argument("--scene", choices=sorted(sc.BUILTIN), help="built-in scene")
    p.add_argument("--scene-file", help="scene JSON file")
    p.add_argument("--f", type=_floats, help="region intensities, comma separated")
    p.add_argument("--pixels", type=int, default=100)
    p.add_argument("--margin", type=int, default=3)


def build_parser():
    parser = _Parser(prog="topovertex", description="Vertex and junction detection "
                     "with second-order topological derivatives.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("scene", help="render a scene to PGM")
    _add_scene(p)
    p.add_argument("--out", default="out")

    p = sub.add_parser("precompute", help="fill the polarization cache")
    p.add_argument("--m", type=int, default=8, help="angular subdivision")
    p.add_argument("--lines", type=_ints, default=[2, 3], help="line counts, e.g. 2,3")
    p.add_argument("--shape", action="append", default=[], help="extra shape id such as w[0,90]")
    _add_params(p)

    p = sub.add_parser("map", help="TD1/TD2 maps of one shape")
    _add_scene(p)
    p.add_argument("--shape", required=True, help="shape id such as w[0,90]")
    p.add_argument("--out", default="out")
    _add_params(p)

    p = sub.add_parser("detect", help="rank all shapes of a shape set")
    _add_scene(p)
    p.add_argument("--m", type=int, default=8)
    p.add_argument("--lines", type=_ints, default=[2, 3])
    p.add_argument("--top", type=int, default=None, help="rows to print (the CSV is complete)")
    p.add_argument("--radius", type=float, default=3.0, help="label radius in pixels")
    p.add_argument("--out", default="out")
    _add_params(p)

    p = sub.add_parser("validate", help="run the self-check suites")
    p.add_argument("--suite", action="append", choices=["disk", "symmetry", "manufactured", "finite-eps"])
    _add_params(p)
    return parser


def _params(args):
    return fem.SolveParams(alpha=args.alpha, lambda_in=args.lambda_in, lambda_out=args.lambda_out,
                           cg_tol=args.cg_tol)


def _exterior(args):
    return build_graded_grid(R=args.R, h_f=args.h_f, L_f=args.L_f, rho=args.rho)


def _scene(args):
    if (args.scene is None) == (args.scene_file is None):
        raise UsageError("give exactly one of --scene and --scene-file")
    if args.scene is not None:
        if args.f is None:
            raise UsageError("--scene needs --f")
        return sc.builtin_scene(args.scene, args.f)
    try:
        spec = sc.load_scene(args.scene_file)
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read scene file {args.scene_file}: {exc}")
    return spec.with_intensities(args.f) if args.f is not None else spec


def _config(args, **extra):
    """Run configuration for provenance; paths and thread counts are left out on purpose."""
    skip = {"cache", "threads", "out", "verbose", "recompute", "func"}
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in skip}
    cfg.update(extra)
    return cfg


def _outdir(args):
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise UsageError(f"cannot create output directory {out}: {exc}")
    return out


def cmd_scene(args):
    spec = _scene(args)
    grid = sc.image_grid(args.pixels)
    f = sc.rasterize(spec, grid)
    out = _outdir(args)
    path = export.write_pgm(out / f"{spec.name}.pgm", f.values)
    export.write_metadata(export.sidecar(path), _config(args, scene_spec=spec.to_json()))
    print(path)
    return 0


def _pool_map(fn, items, threads):
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def cmd_precompute(args):
    params = _params(args)
    grid = _exterior(args)
    shapes = list(generate_theta(args.m, args.lines, args.w))
    shapes += [build_inclusion(parse_shape_id(s), args.w) for s in args.shape]

    def one(shape):
        return pol.load_or_compute(shape, params, args.cache, grid, args.recompute)

    results = _pool_map(one, shapes, args.threads)
    for data in results:
        print(f"{data.shape_id}\t{data.hash[:8]}")
    print(f"{len(results)} shapes cached in {args.cache}")
    return 0


def cmd_map(args):
    params = _params(args)
    spec = _scene(args)
    shape = build_inclusion(parse_shape_id(args.shape), args.w)
    data = pol.load_or_compute(shape, params, args.cache, _exterior(args), args.recompute)
    grid = sc.image_grid(args.pixels)
    u = fem.solve_state(sc.rasterize(spec, grid), params)
    derivs = fem.extract_derivatives(u, args.margin)
    out = _outdir(args)
    cfg = _config(args, scene_spec=spec.to_json(), polarization_hash=data.hash)
    for td in (eval_td1(derivs, data, params), eval_td2(derivs, data, params)):
        stem = out / f"td{td.order}-{shape.id}"
        csv_path = export.write_field_csv(stem.with_suffix(".csv"), grid, td.values)
        pgm_path = export.write_pgm(stem.with_suffix(".pgm"), td.values, mode="negative")
        for path in (csv_path, pgm_path):
            export.write_metadata(export.sidecar(path), cfg)
        x, y = td.argmin_xy
        print(f"TD{td.order} {shape.id}: min {td.min_value:.6g} at pixel {td.argmin} (x={x:g}, y={y:g})")
    return 0


def cmd_detect(args):
    params = _params(args)
    spec = _scene(args)
    theta = generate_theta(args.m, args.lines, args.w)
    grid = sc.image_grid(args.pixels)
    f = sc.rasterize(spec, grid)
    entries = run_detection(f, theta, params, args.cache, args.margin, args.threads,
                            args.recompute, _exterior(args))
    entries = label_positions(entries, grid, spec.labels, spec.edge_labels, args.radius)
    out = _outdir(args)
    path = export.write_ranking_csv(out / f"ranking-{spec.name}.csv", entries)
    export.write_metadata(export.sidecar(path), _config(args, scene_spec=spec.to_json()))
    shown = entries if args.top is None else entries[:args.top]
    print(f"{'rank':>4} {'min TD2':>12}  {'shape':<16} {'pixel':<10} position")
    for e in shown:
        print(f"{e.rank:>4} {e.min_value:>12.4f}  {e.shape_id:<16} {str(e.argmin):<10} {e.label}")
    print(path)
    return 0


def cmd_validate(args):
    from .validate import SUITES, run_all
    checks = run_all(_params(args), args.cache, args.suite or SUITES)
    for c in checks:
        print(c.line())
    failed = [c for c in checks if not c.passed]
    print(f"{len(checks) - len(failed)}/{len(checks)} checks passed")
    return 2 if failed else 0


COMMANDS = {"scene": cmd_scene, "precompute": cmd_precompute, "map": cmd_map,
            "detect": cmd_detect, "validate": cmd_validate}


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if getattr(args, "threads", 1) < 1:
            raise UsageError("--threads must be at least 1")
        return COMMANDS[args.command](args)
    except (UsageError, ParameterError, DimensionError, ConsistencyError, ShapeDegeneracyError,
            FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (SolverError, GeometryError, TopoVertexError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
