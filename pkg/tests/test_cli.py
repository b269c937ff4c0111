import json
import os

import numpy as np
import pytest

from nurbsct import io
from nurbsct.cli import main
from nurbsct.config import ExperimentConfig, bundled_config_path, load_config
from nurbsct.errors import ConfigError, StageError
from nurbsct.experiment import run_experiment
from nurbsct.metrics import attenuation_error, shape_error
from nurbsct.projector import FanBeamGeometry, Sinogram

SMALL = """
[experiment]
seed = 3
[data]
phantom_n = 128
[model]
n = 32
[dram]
n_iter = 1500
block = 500
[tv]
n_alpha = 3
alpha_min = 1e-3
alpha_max = 1e-1
n_beta = 21
max_iter = 150
[output]
highres = 128
trace_points = 200
"""


def _small(tmp_path, name="run", extra=""):
    cfg = ExperimentConfig.from_string(SMALL + extra)
    cfg.output.out = str(tmp_path / name)
    return cfg


def test_metrics_examples():
    t = np.zeros((4, 4))
    t[:2] = 1
    assert shape_error(t, t) == 0.0
    assert shape_error(t, 1 - t) == 200.0
    assert shape_error(t, 5 * t) == 0.0
    assert attenuation_error(0.027, 0.027) == 0.0
    assert attenuation_error(0.027, 0.0271) == pytest.approx(0.37, abs=0.005)
    assert attenuation_error(0.027, 0.03) == pytest.approx(attenuation_error(0.027, 0.024))


def test_config_defaults_roundtrip():
    for label, k in (("omega1", 6), ("omega2", 12)):
        cfg = ExperimentConfig.default(label)
        assert cfg.model.control_points == k and cfg.model.n == 64 and cfg.geometry.views == 6
        assert cfg.prior.prior_r == 32.0 and cfg.prior.prior_c == 0.1 and cfg.dram.n0 == 100
        again = ExperimentConfig.from_string(cfg.to_string())
        assert again == cfg
        assert load_config(phantom=label) == cfg
        assert os.path.exists(bundled_config_path(label))
    prior = ExperimentConfig.default("omega2").build_prior()
    assert np.allclose(np.diff(prior.center.angles), np.pi / 6)


@pytest.mark.parametrize("text", [
    "[bogus]\nx = 1\n",
    "[dram]\nnot_a_key = 3\n",
    "[model]\ncontrol_points = 2\n",
    "[dram]\nn0 = 0\n",
    "[tv]\nalpha_spacing = cubic\n",
    "[dram]\nadapt = maybe\n",
    "[model]\nn = many\n",
    "[data]\nphantom = omega9\n",
    "[data]\nmeasured = x.csv\nmeasured_views = 100\n",
])
def test_config_rejects(text):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_string(text)


def test_dry_run_writes_nothing(tmp_path):
    cfg = _small(tmp_path)
    res = run_experiment(cfg, dry_run=True)
    assert res.summary["matrix"]["shape"] == [6 * 96, 32 * 32]
    assert not os.path.exists(cfg.output.out)


def test_smoke_run_artifacts_and_determinism(tmp_path):
    a = run_experiment(_small(tmp_path, "a"))
    b = run_experiment(_small(tmp_path, "b"))
    out = tmp_path / "a"
    man = json.loads((out / "manifest.json").read_text())
    for name in ("config.ini", "sinogram.csv", "truth.pgm", "mcmc_cm.pgm", "mcmc_cm.csv",
                 "mcmc_cm_128.pgm", "mcmc_cm.svg", "mcmc_cm_params.json", "chain.csv",
                 "mcmc_top1.svg", "geweke.csv", "histograms.csv", "traces.csv", "sweep.csv",
                 "tv_recon.pgm", "tv_recon.csv", "tv_threshold.pgm", "errors.csv", "timing.csv",
                 "summary.json", "plots/trace_c.pgm", "plots/hist_r0.pgm"):
        assert name in man, name
    for name in man:
        assert (out / name).stat().st_size > 0
    assert (out / "errors.csv").read_bytes() == (tmp_path / "b" / "errors.csv").read_bytes()
    assert [r.method for r in a.reports] == ["mcmc-nurbs", "thresholded-tv"]
    assert len(io.read_sweep_csv(out / "sweep.csv")) == 3 * 21
    assert io.read_pgm(out / "mcmc_cm_128.pgm").shape == (128, 128)
    assert len(man) == len(a.artifacts)
    hist_rows = (out / "histograms.csv").read_text().splitlines()[1:]
    assert {r.split(",")[0] for r in hist_rows} == {f"{p}{i}" for i in range(6)
                                                   for p in ("r", "theta")} | {"c"}
    assert b.reports[0].shape_error_percent == a.reports[0].shape_error_percent


def test_stage_tagged_failure_keeps_partial_output(tmp_path):
    cfg = _small(tmp_path, "bad")
    cfg.dram.init_radius_fraction = 0.9  # outside r_max: infeasible initial state
    with pytest.raises(StageError) as exc:
        run_experiment(cfg)
    assert exc.value.stage == "mcmc"
    assert os.path.exists(os.path.join(cfg.output.out, "sinogram.csv"))


def _write_cfg(tmp_path, extra=""):
    p = tmp_path / "small.ini"
    p.write_text(SMALL + extra)
    return str(p)


def test_cli_subcommands(tmp_path, capsys):
    cfgp = _write_cfg(tmp_path)
    out = str(tmp_path / "cli")
    assert main(["phantom", "--phantom", "omega2", "--size", "64", "--out", out]) == 0
    assert io.read_pgm(os.path.join(out, "omega2_64.pgm")).shape == (64, 64)
    assert main(["simulate", "--config", cfgp, "--out", out, "--format", "bin"]) == 0
    s = io.read_sinogram(os.path.join(out, "sinogram.sino"))
    assert (s.views, s.bins) == (6, 96)
    assert main(["reconstruct-tv", "--config", cfgp, "--out", out, "--alpha", "0.01",
                 "--beta", "0.015"]) in (0, 3)
    assert os.path.exists(os.path.join(out, "tv_threshold.pgm"))
    assert main(["run", "--config", cfgp, "--out", out, "--dry-run"]) == 0
    assert main(["run", "--config", cfgp, "--out", out, "--iters", "600", "--seed", "5"]) == 0
    capsys.readouterr()
    assert main(["report", "--config", cfgp, "--out", out]) == 0
    text = capsys.readouterr().out
    assert "mcmc-nurbs" in text and "thresholded-tv" in text
    rows = open(os.path.join(out, "chain.csv")).read().splitlines()
    assert len(rows) == 601


def test_cli_resume(tmp_path):
    cfgp = _write_cfg(tmp_path)
    out = str(tmp_path / "res")
    assert main(["reconstruct-mcmc", "--config", cfgp, "--out", out, "--iters", "1000"]) == 0
    first = open(os.path.join(out, "chain.csv")).read()
    assert main(["reconstruct-mcmc", "--config", cfgp, "--out", out, "--iters", "1500",
                 "--resume"]) == 0
    full = str(tmp_path / "full")
    assert main(["reconstruct-mcmc", "--config", cfgp, "--out", full, "--iters", "1500"]) == 0
    resumed = open(os.path.join(out, "chain.csv")).read()
    assert resumed.startswith(first)
    assert resumed == open(os.path.join(full, "chain.csv")).read()


def test_cli_measured_path(tmp_path):
    rng = np.random.default_rng(0)
    g = FanBeamGeometry.default(num_views=120)
    raw = Sinogram(np.exp(-rng.uniform(0, 2, 120 * g.num_detector_bins)), 120, g.num_detector_bins)
    path = str(tmp_path / "raw.sino")
    io.write_sinogram(path, raw)
    cfgp = _write_cfg(tmp_path)
    out = str(tmp_path / "meas")
    assert main(["run", "--config", cfgp, "--measured", path, "--out", out, "--dry-run"]) == 2
    assert main(["run", "--config", cfgp, "--measured", path, "--noise-sigma", "0.05",
                 "--out", out, "--dry-run"]) == 0
    assert main(["run", "--config", cfgp, "--measured", path, "--views", "7",
                 "--noise-sigma", "0.05", "--out", out, "--dry-run"]) == 2


def test_cli_errors(tmp_path, capsys):
    assert main(["run", "--config", str(tmp_path / "missing.ini"), "--dry-run"]) == 1
    bad = tmp_path / "bad.ini"
    bad.write_text("[dram]\nn0 = -4\n")
    assert main(["run", "--config", str(bad), "--dry-run"]) == 2
    assert "config error" in capsys.readouterr().err
    with pytest.raises(SystemExit):
        main(["frobnicate"])
