"""Command-line interface.

Subcommands: phantom, simulate, reconstruct-mcmc, reconstruct-tv, sweep,
report, run.  Every subcommand accepts ``--config``, ``--seed``, ``--iters``
and ``--out``; other flags override individual config keys.
"""
import argparse
import csv
import json
import logging
import os
import sys

from . import io
from .config import load_config
from .errors import ConfigError, ReconError
from .experiment import prepare_data, run_experiment, run_tv_fixed
from .phantoms import make_phantom
from .projector import MatrixCache

log = logging.getLogger("nurbsct")


def _common(p):
    p.add_argument("--config", help="INI experiment config (defaults per phantom otherwise)")
    p.add_argument("--phantom", help="omega1 | omega2")
    p.add_argument("--seed", type=int)
    p.add_argument("--iters", type=int, help="DRAM iterations")
    p.add_argument("--out", help="output directory")
    p.add_argument("--views", type=int)
    p.add_argument("--n", type=int, help="working grid side")
    p.add_argument("--control-points", type=int)
    p.add_argument("--noise-percent", type=float)
    p.add_argument("--measured", help="raw measured sinogram (CSV or SINO binary)")
    p.add_argument("--noise-sigma", type=float, help="likelihood sigma for measured data")
    p.add_argument("-v", "--verbose", action="count", default=0)


def build_parser():
    ap = argparse.ArgumentParser(prog="nurbsct",
                                 description="NURBS-MCMC shape recovery from sparse fan-beam CT")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("phantom", help="write a phantom image")
    _common(p)
    p.add_argument("--size", type=int, default=256)

    p = sub.add_parser("simulate", help="simulate noisy sinogram data")
    _common(p)
    p.add_argument("--format", choices=("csv", "bin"), default="csv")

    p = sub.add_parser("reconstruct-mcmc", help="DRAM sampling and CM estimate")
    _common(p)
    p.add_argument("--resume", action="store_true", help="continue chain.csv in --out")

    p = sub.add_parser("reconstruct-tv", help="TV reconstruction at fixed alpha")
    _common(p)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--beta", type=float, help="threshold level")

    p = sub.add_parser("sweep", help="optimal (alpha, beta) thresholded-TV sweep")
    _common(p)
    p.add_argument("--workers", type=int)

    p = sub.add_parser("report", help="print the error table of a finished run")
    _common(p)

    p = sub.add_parser("run", help="full pipeline")
    _common(p)
    p.add_argument("--dry-run", action="store_true",
                   help="validate config and build the system matrix only")
    p.add_argument("--resume", action="store_true")
    return ap


def _configure(args):
    cfg = load_config(args.config, phantom=args.phantom)
    if args.config and args.phantom:
        cfg.data.phantom = args.phantom
    if args.seed is not None:
        cfg.seed = args.seed
    if args.iters is not None:
        cfg.dram.n_iter = args.iters
    if args.out:
        cfg.output.out = args.out
    if args.views is not None:
        cfg.geometry.views = args.views
    if args.n is not None:
        cfg.model.n = args.n
    if args.control_points is not None:
        cfg.model.control_points = args.control_points
    if args.noise_percent is not None:
        cfg.data.noise_percent = args.noise_percent
    if args.measured:
        cfg.data.measured = args.measured
    if args.noise_sigma is not None:
        cfg.data.noise_sigma = args.noise_sigma
    if getattr(args, "resume", False):
        cfg.dram.resume = True
    if getattr(args, "workers", None):
        cfg.tv.workers = args.workers
    return cfg.validate()


def _print_reports(reports, stream=sys.stdout):
    for r in reports:
        shp = "n/a" if r.shape_error_percent is None else f"{r.shape_error_percent:.2f}%"
        att = "n/a" if r.attenuation_error_percent is None else f"{r.attenuation_error_percent:.2f}%"
        print(f"{r.method:16s} shape {shp:>8s}  attenuation {att:>8s}  "
              f"({r.runtime_seconds:.1f} s)", file=stream)


def _progress(t, acc):
    log.info("iteration %d, acceptance %.3f", t, acc)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _configure(args)
        out = cfg.output.out
        cmd = args.command
        if cmd == "phantom":
            os.makedirs(out, exist_ok=True)
            ph = make_phantom(cfg.data.phantom, args.size, width=cfg.geometry.width)
            base = os.path.join(out, f"{ph.label}_{args.size}")
            io.write_pgm(base + ".pgm", ph.image)
            io.write_raster_csv(base + ".csv", ph.image)
            print(base + ".pgm")
        elif cmd == "simulate":
            os.makedirs(out, exist_ok=True)
            data, _ = prepare_data(cfg, MatrixCache())
            path = os.path.join(out, "sinogram." + ("csv" if args.format == "csv" else "sino"))
            io.write_sinogram(path, data.sinogram, fmt=args.format)
            print(f"{path} sigma={data.noise_sigma:.6g}")
        elif cmd == "reconstruct-mcmc":
            res = run_experiment(cfg, branches=("mcmc",), progress=_progress)
            _print_reports(res.reports)
        elif cmd == "sweep":
            res = run_experiment(cfg, branches=("tv",))
            _print_reports(res.reports)
            print(json.dumps(res.summary.get("tv", {})))
        elif cmd == "reconstruct-tv":
            cache = MatrixCache()
            data, truth = prepare_data(cfg, cache)
            rec, thr = run_tv_fixed(cfg, data, cache, args.alpha, args.beta)
            os.makedirs(out, exist_ok=True)
            io.write_pgm(os.path.join(out, "tv_recon.pgm"), rec.image)
            io.write_raster_csv(os.path.join(out, "tv_recon.csv"), rec.image)
            if thr is not None:
                io.write_pgm(os.path.join(out, "tv_threshold.pgm"), thr)
            print(f"objective={rec.objective:.6g} converged={rec.converged} "
                  f"iterations={rec.iterations}")
            if not rec.converged:
                return 3
        elif cmd == "report":
            path = os.path.join(out, "errors.csv")
            with open(path, newline="") as fh:
                for row in csv.reader(fh):
                    print("  ".join(f"{c:>26s}" for c in row))
        elif cmd == "run":
            res = run_experiment(cfg, dry_run=args.dry_run, progress=_progress)
            if args.dry_run:
                print(json.dumps(res.summary, indent=2))
            else:
                _print_reports(res.reports)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ReconError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
