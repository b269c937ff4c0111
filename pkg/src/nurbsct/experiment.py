"""End-to-end pipeline: data, MCMC-NURBS, TV baseline, metrics and artifacts."""
from dataclasses import asdict, dataclass
import csv
import json
import logging
import os
import time

import numpy as np

from . import diagnostics, io, metrics
from .errors import ReconError, StageError
from .phantoms import (PHANTOM_VALUE, MeasurementData, make_phantom, normalize_measured,
                       simulate_data, subsample_views)
from .posterior import PosteriorProblem
from .projector import MatrixCache
from .raster import RasterImage, rasterize
from .sampler import cm_estimate, dram_sample, top_posterior_states, write_chain_csv
from .tv import TvProblem, optimal_sweep, threshold, tv_reconstruct

__all__ = ["ErrorReport", "ExperimentResult", "prepare_data", "run_mcmc", "run_tv_sweep",
           "run_tv_fixed", "run_experiment", "write_errors_csv"]

log = logging.getLogger(__name__)


@dataclass
class ErrorReport:
    method: str
    shape_error_percent: float
    attenuation_error_percent: float
    runtime_seconds: float


@dataclass
class ExperimentResult:
    reports: list
    artifacts: list
    summary: dict


class _Stage:
    """Context manager tagging failures with the stage name and timing the stage."""

    def __init__(self, name, timings):
        self.name = name
        self.timings = timings

    def __enter__(self):
        self.t0 = time.perf_counter()
        log.info("stage %s", self.name)
        return self

    def __exit__(self, kind, exc, tb):
        self.timings[self.name] = time.perf_counter() - self.t0
        if exc is not None and not isinstance(exc, StageError):
            raise StageError(self.name, exc) from exc
        return False


def prepare_data(cfg, cache):
    """Measurement data plus truth image (None for measured data without one)."""
    d = cfg.data
    geom = cfg.build_geometry()
    if d.measured:
        raw = io.read_sinogram(d.measured)
        full_geom = cfg.build_full_geometry()
        if (raw.views, raw.bins) != (full_geom.num_views, full_geom.num_detector_bins):
            raise ReconError("measured sinogram does not match the full-scan geometry")
        sino = normalize_measured(raw, floor=d.floor)
        if d.noise_sigma is None:
            raise ReconError("measured data needs data.noise_sigma")
        full = MeasurementData(sino, full_geom, d.noise_sigma, provenance="measured")
        data = subsample_views(full, geom.num_views)
        truth = None
        if d.truth:
            loader = io.read_raster_csv if d.truth.endswith(".csv") else None
            truth = (loader(d.truth, width=geom.width) if loader
                     else RasterImage(io.read_pgm(d.truth).astype(float), width=geom.width))
        return data, truth
    ph = make_phantom(d.phantom, d.phantom_n, width=geom.width)
    data = simulate_data(ph, geom, d.noise_percent, seed=cfg.seed, cache=cache,
                         reference=d.noise_reference)
    truth = make_phantom(d.phantom, cfg.model.n, width=geom.width).image
    return data, truth


def _c_true(cfg):
    if cfg.data.c_true is not None:
        return cfg.data.c_true
    return None if cfg.data.measured else PHANTOM_VALUE


def run_mcmc(cfg, data, cache, out=None, n_iter=None, progress=None):
    prior = cfg.build_prior()
    prob = PosteriorProblem(data, cfg.model.n, prior, degree=cfg.model.degree, cache=cache)
    dcfg = cfg.build_dram(prior, n_iter=n_iter)
    if cfg.dram.max_hours:
        log.info("runtime budget %.2f h for %d iterations", cfg.dram.max_hours, dcfg.n_iter)
    chain_path = os.path.join(out, "chain.csv") if out else None
    chain = dram_sample(prob, dcfg, chain_path=chain_path, resume=cfg.dram.resume,
                        progress=progress)
    cm = cm_estimate(chain, dcfg.burn_in, circular=cfg.dram.circular_mean)
    return prob, chain, cm


def run_tv_sweep(cfg, data, truth, cache):
    A = cache.get(data.geometry, cfg.model.n)
    tmpl = TvProblem(A, data.sinogram, cfg.model.n, 1.0, nonneg=cfg.tv.nonneg)
    return optimal_sweep(tmpl, cfg.build_sweep_grid(), truth, tol=cfg.tv.tol,
                         max_iter=cfg.tv.max_iter, workers=cfg.tv.workers)


def run_tv_fixed(cfg, data, cache, alpha, beta=None):
    A = cache.get(data.geometry, cfg.model.n)
    rec = tv_reconstruct(TvProblem(A, data.sinogram, cfg.model.n, alpha, nonneg=cfg.tv.nonneg),
                         tol=cfg.tv.tol, max_iter=cfg.tv.max_iter)
    return rec, (threshold(rec.image, beta) if beta is not None else None)


def write_errors_csv(path, reports):
    """Error table without runtimes, so repeated runs are byte-identical."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "shape_error_percent", "attenuation_error_percent"])
        for r in reports:
            att = "" if r.attenuation_error_percent is None else repr(float(r.attenuation_error_percent))
            shp = "" if r.shape_error_percent is None else repr(float(r.shape_error_percent))
            w.writerow([r.method, shp, att])


def _write_timing(path, reports, timings):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["item", "seconds"])
        for r in reports:
            w.writerow([r.method, f"{r.runtime_seconds:.3f}"])
        for k, v in timings.items():
            w.writerow([f"stage:{k}", f"{v:.3f}"])


def _mcmc_artifacts(cfg, out, prob, chain, cm, add):
    o = cfg.output
    n = cfg.model.n
    p = cfg.model.degree
    width = cfg.geometry.width
    img = rasterize(cm, n, degree=p, width=width)
    hi = rasterize(cm, o.highres, degree=p, width=width)
    io.write_pgm(add("mcmc_cm.pgm"), img, vmax=cm.c or None)
    io.write_raster_csv(add("mcmc_cm.csv"), img)
    io.write_pgm(add(f"mcmc_cm_{o.highres}.pgm"), hi, vmax=cm.c or None)
    io.write_svg(add("mcmc_cm.svg"), cm, o.highres, width=width, degree=p, m=o.svg_samples)
    with open(add("mcmc_cm_params.json"), "w") as fh:
        json.dump({"radii": cm.radii.tolist(), "angles": cm.angles.tolist(), "c": cm.c,
                   "iterations": len(chain), "posterior_evaluations": chain.n_evals,
                   "acceptance_rate": chain.acceptance_rate,
                   "stage_counts": chain.stage_counts().tolist()}, fh, indent=2)
    if not cfg.dram.resume or not os.path.exists(os.path.join(out, "chain.csv")):
        write_chain_csv(chain, add("chain.csv"))
    else:
        add("chain.csv")
    for k, s in enumerate(top_posterior_states(chain, min(cfg.dram.top_k, len(chain)))):
        io.write_svg(add(f"mcmc_top{k + 1}.svg"), s, o.highres, width=width, degree=p,
                     m=o.svg_samples)
    z = diagnostics.geweke_all(chain, burn_in=cfg.dram.burn_in)
    names = list(diagnostics.traces(chain, 1))
    with open(add("geweke.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["component", "z", "ess"])
        xs, _ = chain.post_burn_in(cfg.dram.burn_in)
        for j, name in enumerate(names):
            try:
                ess = diagnostics.effective_sample_size(xs[:, j])
            except ReconError:
                ess = float("nan")
            w.writerow([name, repr(float(z[j])), repr(float(ess))])
    hists = diagnostics.histograms(chain, o.histogram_bins, cfg.dram.burn_in)
    tr = diagnostics.traces(chain, o.trace_points)
    io.write_histograms_csv(add("histograms.csv"), hists)
    io.write_traces_csv(add("traces.csv"), tr)
    if o.plots:
        for name in names:
            io.plot_pgm(add(f"plots/trace_{name}.pgm"), tr[name], kind="trace")
            io.plot_pgm(add(f"plots/hist_{name}.pgm"), hists[name][0], kind="hist")
    return img


def run_experiment(cfg, dry_run=False, branches=("mcmc", "tv"), n_iter=None, progress=None):
    """Run the configured pipeline and write every artifact under ``cfg.output.out``.

    With ``dry_run`` the config is validated and the system matrix built, but
    nothing is written.  Failures raise :class:`StageError` naming the stage;
    files already written stay in place.
    """
    timings = {}
    cache = MatrixCache()
    summary = {}
    with _Stage("config", timings):
        cfg.validate()
    with _Stage("data", timings):
        data, truth = prepare_data(cfg, cache)
        summary["data"] = {"views": data.geometry.num_views, "bins": data.geometry.num_detector_bins,
                           "noise_sigma": data.noise_sigma, "provenance": data.provenance}
    with _Stage("matrix", timings):
        A = cache.get(data.geometry, cfg.model.n)
        summary["matrix"] = {"shape": list(A.shape), "nnz": int(A.csr.nnz)}
    if dry_run:
        summary["stages"] = {k: round(v, 3) for k, v in timings.items()}
        return ExperimentResult([], [], summary)

    out = cfg.output.out
    os.makedirs(out, exist_ok=True)
    artifacts = []

    def add(name):
        path = os.path.join(out, name)
        os.makedirs(os.path.dirname(path), exist_ok=True)
        if path not in artifacts:
            artifacts.append(path)
        return path

    with open(add("config.ini"), "w") as fh:
        fh.write(cfg.to_string())
    io.write_sinogram(add("sinogram.csv"), data.sinogram)
    if truth is not None:
        io.write_pgm(add("truth.pgm"), truth)
    c_true = _c_true(cfg)
    reports = []

    if "mcmc" in branches:
        with _Stage("mcmc", timings):
            t0 = time.perf_counter()
            prob, chain, cm = run_mcmc(cfg, data, cache, out, n_iter=n_iter, progress=progress)
            rt = time.perf_counter() - t0
        with _Stage("mcmc-output", timings):
            img = _mcmc_artifacts(cfg, out, prob, chain, cm, add)
            shp = metrics.shape_error(truth, img) if truth is not None else None
            att = metrics.attenuation_error(c_true, cm.c) if c_true else None
            reports.append(ErrorReport("mcmc-nurbs", shp, att, rt))
            summary["mcmc"] = {"acceptance_rate": chain.acceptance_rate, "c_cm": cm.c,
                               "posterior_evaluations": chain.n_evals,
                               "convex_hull_excess": metrics.convex_hull_excess(img)
                               if img.values.any() else None}

    if "tv" in branches and truth is not None:
        with _Stage("tv", timings):
            t0 = time.perf_counter()
            sw = run_tv_sweep(cfg, data, truth, cache)
            rt = time.perf_counter() - t0
        with _Stage("tv-output", timings):
            io.write_sweep_csv(add("sweep.csv"), sw.table)
            io.write_pgm(add("tv_recon.pgm"), sw.reconstruction.image)
            io.write_raster_csv(add("tv_recon.csv"), sw.reconstruction.image)
            io.write_pgm(add("tv_threshold.pgm"), sw.image)
            att = metrics.attenuation_error(c_true, sw.beta) if c_true else None
            reports.append(ErrorReport("thresholded-tv", sw.error, att, rt))
            summary["tv"] = {"alpha": sw.alpha, "beta": sw.beta, "error": sw.error,
                             "converged": bool(sw.reconstruction.converged)}

    write_errors_csv(add("errors.csv"), reports)
    _write_timing(add("timing.csv"), reports, timings)
    with open(add("summary.json"), "w") as fh:
        json.dump(_jsonable(summary), fh, indent=2, sort_keys=True)
    manifest = add("manifest.json")
    with open(manifest, "w") as fh:
        json.dump(sorted(os.path.relpath(a, out) for a in artifacts), fh, indent=1)
    missing = [a for a in artifacts if not os.path.exists(a) or os.path.getsize(a) == 0]
    if missing:
        raise StageError("manifest", ReconError(f"empty or missing artifacts: {missing}"))
    return ExperimentResult(reports, artifacts, summary)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def report_dict(r):
    return asdict(r)
