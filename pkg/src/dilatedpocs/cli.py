"""Command-line interface: every library capability as a reproducible subcommand.

Each successful command prints a machine-readable JSON report on stdout.
Exit codes: 0 success, 1 usage or bad arguments, 2 numerical failure or an
infeasible problem, 3 I/O or file-format trouble.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import io_formats as iof
from . import tomo
from .engine import PocsOptions, Status, alternating_pocs, simultaneous_pocs
from .search import (
    BracketingError,
    DilationProblem,
    ToleranceConflictError,
    UnsolvableProblemError,
    interval_halving,
)
from .sets import ErosionError
from .solvers import LinearSystem, SingularSystemError, minimax_solve, mmse_solve

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERICAL = 2
EXIT_IO = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _emit(report, output=None):
    text = json.dumps(report, indent=2, sort_keys=True)
    print(text)
    if output:
        Path(output).write_text(text + "\n")


def _pocs_options(args):
    kw = {}
    for name in ("max_iters", "step_tol", "residual_tol"):
        v = getattr(args, name, None)
        if v is not None:
            kw[name] = v
    return PocsOptions(**kw)


def cmd_solve(args):
    A = iof.read_matrix_auto(args.matrix)
    y = iof.read_csv_vector(args.rhs)
    system = LinearSystem(A, y)
    if args.method == "mmse":
        report = mmse_solve(system)
    else:
        rates = iof.read_csv_vector(args.rates) if args.rates else None
        report = minimax_solve(system, rates=rates, bracket_tol=args.bracket_tol,
                               normalize_rows=args.normalize_rows)
    _emit(report.to_dict(), args.output)
    return EXIT_OK


def cmd_pocs(args):
    sets = iof.read_sets_json(args.sets)
    x0 = iof.read_csv_vector(args.x0)
    opts = _pocs_options(args)
    if args.mode == "alternating":
        out = alternating_pocs(sets, x0, epsilon=args.epsilon, opts=opts)
    else:
        if args.weights:
            w = iof.read_csv_vector(args.weights)
        else:
            w = np.full(len(sets), 1.0 / len(sets))
        out = simultaneous_pocs(sets, w, x0, opts=opts, epsilon=args.epsilon)
    if args.trace:
        iof.write_trace_csv(args.trace, out.trace)
    _emit({
        "mode": args.mode,
        "status": out.status.value,
        "x_final": out.x_final.tolist(),
        "cycles": out.trace.cycles,
        "residual_max": out.trace.residuals[-1],
        "displacement": out.trace.displacements[-1],
    }, args.output)
    return EXIT_OK if out.status is Status.CONVERGED else EXIT_NUMERICAL


def cmd_dilate_search(args):
    sets = iof.read_sets_json(args.sets)
    x0 = iof.read_csv_vector(args.x0) if args.x0 else np.zeros(sets[0].dim)
    problem = DilationProblem(sets, x0, _pocs_options(args))
    result = interval_halving(problem, bracket_tol=args.bracket_tol)
    if args.history:
        iof.write_bracket_csv(args.history, result.bracket_history)
    _emit(result.to_dict(), args.output)
    return EXIT_OK


def cmd_erode_demo(args):
    sets = iof.read_sets_json(args.sets)
    eroded = [s.erode(args.epsilon) for s in sets]
    opts = _pocs_options(args)
    rng = tomo.make_rng(args.seed)
    # sample starts around the sets: centroid of each set's projection of
    # the origin, spread by the largest centroid distance
    anchors = np.stack([s.project(np.zeros(s.dim)) for s in eroded])
    centroid = anchors.mean(axis=0)
    spread = max(float(np.linalg.norm(a - centroid)) for a in anchors) + 1.0
    limits = []
    statuses = []
    for _ in range(args.inits):
        x0 = centroid + rng.normal(0.0, spread, centroid.size)
        out = alternating_pocs(eroded, x0, opts=opts)
        statuses.append(out.status)
        limits.append(out.x_final)
    limits = np.stack(limits)
    spread_max = max(
        float(np.linalg.norm(a - b)) for i, a in enumerate(limits) for b in limits[i + 1:]
    ) if len(limits) > 1 else 0.0
    report = {
        "epsilon": args.epsilon,
        "inits": args.inits,
        "statuses": [s.value for s in statuses],
        "limit_points": limits.tolist(),
        "max_spread": spread_max,
    }
    _emit(report, args.output)
    if any(s is not Status.CONVERGED for s in statuses):
        return EXIT_NUMERICAL
    return EXIT_OK


def _config_geometry(cfg):
    g = cfg["geometry"]
    return tomo.Geometry.create(g["n"], g["angles"], g.get("bins"))


def _workdir(cfg):
    wd = Path(cfg["paths"]["workdir"])
    wd.mkdir(parents=True, exist_ok=True)
    return wd


def _tolerances(cfg):
    t = cfg.get("tolerances", {})
    return PocsOptions(max_iters=500,
                       step_tol=t.get("step_tol", 1e-7),
                       residual_tol=t.get("residual_tol", 1e-3))


def _ct_phantom(cfg):
    geom = _config_geometry(cfg)
    wd = _workdir(cfg)
    img = tomo.shepp_logan(geom.n)
    iof.write_csv_matrix(wd / "phantom.csv", img)
    iof.write_pgm(wd / "phantom.pgm", img)
    return {"stage": "phantom", "n": geom.n,
            "files": [str(wd / "phantom.csv"), str(wd / "phantom.pgm")]}


def _ct_sinogram(cfg):
    geom = _config_geometry(cfg)
    wd = _workdir(cfg)
    img = iof.read_csv_matrix(wd / "phantom.csv")
    A = tomo.build_path_matrix(geom)
    sino = tomo.forward_project(A, img, geom)
    iof.write_sinogram(wd / "sinogram.csv", sino)
    return {"stage": "sinogram", "shape": [geom.angles, geom.bins],
            "rays": geom.rays, "pixels": geom.n * geom.n,
            "files": [str(wd / "sinogram.csv")]}


def _ct_corrupt(cfg):
    wd = _workdir(cfg)
    sino = iof.read_sinogram(wd / "sinogram.csv")
    cor = cfg.get("corruption", {})
    seeds = tomo.split_seeds(cfg["seed"], 3)
    applied = {}
    out = sino
    sigma = cor.get("gaussian_sigma", 0.0)
    if sigma > 0:
        out = tomo.add_gaussian_noise(out, sigma, seeds[0])
        applied["gaussian_sigma"] = sigma
    amp = cor.get("uniform_amplitude", 0.0)
    if amp > 0:
        out = tomo.add_uniform_noise(out, amp, seeds[1])
        applied["uniform_amplitude"] = amp
    shift = cor.get("max_shift", 0)
    if shift > 0:
        out = tomo.apply_lateral_shift(out, shift, seeds[2])
        applied["max_shift"] = shift
    iof.write_sinogram(wd / "given.csv", out)
    return {"stage": "corrupt", "applied": applied, "seed": cfg["seed"],
            "files": [str(wd / "given.csv")]}


def _method_params(cfg, method):
    return cfg.get("methods", {}).get(method, {})


def _reconstruct_one(cfg, method, A, geom, given, blocks):
    p = _method_params(cfg, method)
    opts = _tolerances(cfg)
    extras = {}
    if method == "art":
        img = tomo.art(A, given, iters=p.get("iterations", 10), relax=p.get("relax", 1.0))
    elif method == "sart":
        img = tomo.sart(A, given, iters=p.get("iterations", 200),
                        relax=p.get("relax", 1.0), blocks=blocks)
    elif method == "fbp":
        img = tomo.fbp(given, window=p.get("window"))
    else:
        spec = tomo.BoxDilationSpec(
            epsilon_noise=p.get("epsilon_noise", 0.0),
            max_shift=p.get("max_shift", cfg.get("corruption", {}).get("max_shift", 0)),
            adaptive=p.get("adaptive", True),
        )
        init_kind = p.get("init", "sart")
        if init_kind == "sart":
            x0 = tomo.sart(A, given, iters=p.get("init_iterations", 30), blocks=blocks)
        elif init_kind == "fbp":
            x0 = tomo.fbp(given)
        else:
            x0 = None
        opts = PocsOptions(max_iters=p.get("iterations", 400),
                           step_tol=opts.step_tol, residual_tol=opts.residual_tol)
        res = tomo.dilated_reconstruct(A, given, spec, opts=opts, x0=x0,
                                       relax=p.get("relax", 1.0),
                                       bracket_tol=p.get("bracket_tol"), blocks=blocks)
        img = res.image
        extras = {
            "epsilon_noise": res.epsilon_noise,
            "max_shift": res.max_shift,
            "feasible": res.feasible,
            "max_violation": res.max_violation,
            "probes": res.probes,
            "passes": res.passes,
        }
    return img, extras


def _ct_reconstruct(cfg, method):
    geom = _config_geometry(cfg)
    wd = _workdir(cfg)
    given = iof.read_sinogram(wd / "given.csv")
    A = tomo.build_path_matrix(geom)
    blocks = tomo._AngleBlocks(A, geom)
    img, extras = _reconstruct_one(cfg, method, A, geom, given, blocks)
    iof.write_csv_matrix(wd / f"recon_{method}.csv", img)
    iof.write_pgm(wd / f"recon_{method}.pgm", img)
    l2, linf = tomo.sino_metrics(A, img, given)
    report = {"stage": "reconstruct", "method": method,
              "sino_l2": l2, "sino_linf": linf,
              "files": [str(wd / f"recon_{method}.csv"), str(wd / f"recon_{method}.pgm")]}
    report.update(extras)
    iof.write_report_json(wd / f"report_{method}.json", report)
    if extras.get("feasible") is False:
        return report, EXIT_NUMERICAL
    return report, EXIT_OK


def _ct_compare(cfg):
    geom = _config_geometry(cfg)
    wd = _workdir(cfg)
    given = iof.read_sinogram(wd / "given.csv")
    phantom = iof.read_csv_matrix(wd / "phantom.csv")
    A = tomo.build_path_matrix(geom)
    shift = cfg.get("corruption", {}).get("max_shift", 0)
    lo0, hi0 = tomo.ray_interval_bounds(given, tomo.BoxDilationSpec(0.0, shift, False))
    mask = np.asarray(A.scipy.sum(axis=1)).reshape(-1) > 0
    table = {}
    for method in ("art", "sart", "fbp", "dilated"):
        f = wd / f"recon_{method}.csv"
        if not f.exists():
            continue
        img = iof.read_csv_matrix(f)
        l2, linf = tomo.sino_metrics(A, img, given)
        t = A.matvec(img.ravel())
        window_linf = float(np.max(np.maximum(lo0 - t, t - hi0)[mask], initial=0.0))
        rmse, max_abs = tomo.image_metrics(img, phantom)
        table[method] = {
            "sino_l2": l2,
            "sino_linf": linf,
            "sino_window_linf": window_linf,
            "image_rmse": rmse,
            "image_max_abs": max_abs,
        }
    if not table:
        raise FileNotFoundError(f"no recon_*.csv files in {wd}; run 'ct reconstruct' first")
    report = {"stage": "compare", "max_shift": shift, "methods": table}
    iof.write_report_json(wd / "compare.json", report)
    widths = "%-8s %12s %12s %14s %12s %12s"
    print(widths % ("method", "sino_l2", "sino_linf", "window_linf", "img_rmse", "img_max"),
          file=sys.stderr)
    for m, row in table.items():
        print(widths % (m, f"{row['sino_l2']:.4f}", f"{row['sino_linf']:.4f}",
                        f"{row['sino_window_linf']:.4f}", f"{row['image_rmse']:.4f}",
                        f"{row['image_max_abs']:.4f}"), file=sys.stderr)
    return report


def cmd_ct(args):
    cfg = iof.read_config(args.config)
    code = EXIT_OK
    if args.stage == "phantom":
        report = _ct_phantom(cfg)
    elif args.stage == "sinogram":
        report = _ct_sinogram(cfg)
    elif args.stage == "corrupt":
        report = _ct_corrupt(cfg)
    elif args.stage == "reconstruct":
        report, code = _ct_reconstruct(cfg, args.method)
    else:
        report = _ct_compare(cfg)
    _emit(report, args.output)
    return code


def build_parser():
    parser = _Parser(prog="dpocs", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--output", help="also write the JSON report to this file")
        p.add_argument("--max-iters", dest="max_iters", type=int)
        p.add_argument("--step-tol", dest="step_tol", type=float)
        p.add_argument("--residual-tol", dest="residual_tol", type=float)

    p = sub.add_parser("solve", help="least-squares or minimax solution of y = A x")
    p.add_argument("--matrix", required=True, help="dense CSV or triplet CSV")
    p.add_argument("--rhs", required=True, help="right-hand side vector CSV")
    p.add_argument("--method", required=True, choices=["mmse", "minimax"])
    p.add_argument("--rates", help="per-row dilation rates CSV (minimax)")
    p.add_argument("--normalize-rows", action="store_true",
                   help="rate = row norm, i.e. Euclidean-distance minimax")
    p.add_argument("--bracket-tol", dest="bracket_tol", type=float)
    add_common(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("pocs", help="run alternating or simultaneous projections")
    p.add_argument("--sets", required=True, help="set collection JSON")
    p.add_argument("--x0", required=True, help="start vector CSV")
    p.add_argument("--mode", required=True, choices=["alternating", "simultaneous"])
    p.add_argument("--weights", help="weights CSV (simultaneous; default equal)")
    p.add_argument("--epsilon", type=float, default=0.0, help="global dilation")
    p.add_argument("--trace", help="write per-cycle trace CSV here")
    add_common(p)
    p.set_defaults(func=cmd_pocs)

    p = sub.add_parser("dilate-search", help="minimal dilation by interval halving")
    p.add_argument("--sets", required=True)
    p.add_argument("--x0", help="start vector CSV (default zeros)")
    p.add_argument("--bracket-tol", dest="bracket_tol", type=float)
    p.add_argument("--history", help="write bracket history CSV here")
    add_common(p)
    p.set_defaults(func=cmd_dilate_search)

    p = sub.add_parser("erode-demo", help="alternating projections on eroded sets")
    p.add_argument("--sets", required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--inits", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    add_common(p)
    p.set_defaults(func=cmd_erode_demo)

    p = sub.add_parser("ct", help="computed-tomography pipeline stages")
    p.add_argument("stage", choices=["phantom", "sinogram", "corrupt", "reconstruct", "compare"])
    p.add_argument("--config", required=True, help="experiment config JSON")
    p.add_argument("--method", choices=["art", "sart", "fbp", "dilated"],
                   help="reconstruction method (reconstruct stage)")
    add_common(p)
    p.set_defaults(func=cmd_ct)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else EXIT_USAGE
    if args.command == "ct" and args.stage == "reconstruct" and not args.method:
        parser.print_usage(sys.stderr)
        print("dpocs ct reconstruct: --method is required", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except (iof.FormatError,) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (FileNotFoundError, IsADirectoryError, PermissionError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (UnsolvableProblemError, BracketingError, ToleranceConflictError,
            SingularSystemError, ErosionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
