"""Experiment configuration: flat INI text with one section per pipeline block."""
import configparser
from dataclasses import dataclass, field, fields, replace
from importlib import resources
import math

import numpy as np

from .errors import ConfigError, ReconError
from .phantoms import canonical_label
from .posterior import default_proposal_cov, initial_state
from .prior import PriorSpec
from .projector import FanBeamGeometry
from .sampler import DramConfig
from .tv import SweepGrid

__all__ = ["GeometryBlock", "DataBlock", "ModelBlock", "PriorBlock", "DramBlock", "TvBlock",
           "OutputBlock", "ExperimentConfig", "load_config", "bundled_config_path"]


def _opt_float(x):
    return None if x in (None, "", "none", "None") else float(x)


def _bool(x):
    if isinstance(x, bool):
        return x
    s = str(x).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {x!r}")


@dataclass
class GeometryBlock:
    views: int = 6
    width: float = 64.0
    bins: int = None
    source_radius: float = None
    detector_radius: float = None
    margin: float = 0.10
    start_angle: float = 0.0

    def build(self):
        g = FanBeamGeometry.default(width=self.width, num_views=self.views,
                                    num_detector_bins=self.bins, source_radius=self.source_radius,
                                    detector_radius=self.detector_radius, margin=self.margin)
        return replace(g, start_angle=self.start_angle) if self.start_angle else g


@dataclass
class DataBlock:
    phantom: str = "omega1"
    phantom_n: int = 256
    noise_percent: float = 0.1
    noise_reference: str = "max"
    measured: str = ""
    measured_views: int = 120
    floor: float = 0.1
    noise_sigma: float = None
    truth: str = ""
    c_true: float = None


@dataclass
class ModelBlock:
    n: int = 64
    control_points: int = 6
    degree: int = 3


@dataclass
class PriorBlock:
    prior_r: float = 32.0
    prior_c: float = 0.1
    sigma_r: float = 10.0
    sigma_theta: float = None
    sigma_c: float = 0.05
    r_max: float = None
    window_half: float = None
    osc_k: float = 2.0
    no_intersection: bool = True


@dataclass
class DramBlock:
    n_iter: int = 300000
    n0: int = 100
    adapt_interval: int = 100
    dr_stages: int = 2
    dr_scale: float = 0.2
    burn_in: float = 0.2
    adapt: bool = True
    ridge: float = 1e-6
    adapt_memory: float = 0.5
    gibbs_c: bool = True
    anneal_fraction: float = 0.0
    anneal_start: float = 1e-3
    adapt_scale: float = None
    block: int = 1000
    init_radius_fraction: float = 0.4
    init_c: float = 5.0
    sd_r: float = 0.5
    sd_theta: float = math.pi / 180
    sd_c: float = 0.01
    circular_mean: bool = True
    top_k: int = 6
    resume: bool = False
    max_hours: float = None


@dataclass
class TvBlock:
    n_alpha: int = 30
    alpha_min: float = 1e-6
    alpha_max: float = 100.0
    alpha_spacing: str = "log"
    n_beta: int = 201
    beta_min: float = 0.01
    beta_max: float = 0.03
    nonneg: bool = True
    tol: float = 1e-6
    max_iter: int = 1000
    workers: int = 1


@dataclass
class OutputBlock:
    out: str = "results"
    highres: int = 1128
    svg_samples: int = 720
    histogram_bins: int = 50
    trace_points: int = 2000
    plots: bool = True


_SECTIONS = {
    "geometry": GeometryBlock, "data": DataBlock, "model": ModelBlock, "prior": PriorBlock,
    "dram": DramBlock, "tv": TvBlock, "output": OutputBlock,
}

_OPTIONAL = {"bins", "source_radius", "detector_radius", "noise_sigma", "c_true", "sigma_theta",
             "r_max", "window_half", "max_hours", "adapt_scale"}


def _coerce(cls, name, raw):
    kind = {f.name: f.type for f in fields(cls)}[name]
    if name in _OPTIONAL:
        val = _opt_float(raw)
        return None if val is None else (int(val) if name == "bins" else val)
    if kind is bool or kind == "bool":
        return _bool(raw)
    if kind is int or kind == "int":
        return int(raw)
    if kind is float or kind == "float":
        return float(raw)
    return str(raw)


@dataclass
class ExperimentConfig:
    seed: int = 0
    geometry: GeometryBlock = field(default_factory=GeometryBlock)
    data: DataBlock = field(default_factory=DataBlock)
    model: ModelBlock = field(default_factory=ModelBlock)
    prior: PriorBlock = field(default_factory=PriorBlock)
    dram: DramBlock = field(default_factory=DramBlock)
    tv: TvBlock = field(default_factory=TvBlock)
    output: OutputBlock = field(default_factory=OutputBlock)

    @classmethod
    def default(cls, phantom="omega1", **top):
        label = canonical_label(phantom)
        cfg = cls(**top)
        cfg.data.phantom = label
        cfg.model.control_points = 6 if label == "omega1" else 12
        cfg.output.out = f"results/{label}"
        return cfg

    @classmethod
    def from_string(cls, text):
        parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse config: {exc}") from exc
        cfg = cls()
        for sec in parser.sections():
            if sec == "experiment":
                for key, raw in parser[sec].items():
                    if key != "seed":
                        raise ConfigError(f"unknown key [experiment] {key}")
                    cfg.seed = int(raw)
                continue
            if sec not in _SECTIONS:
                raise ConfigError(f"unknown config section [{sec}]")
            block_cls = _SECTIONS[sec]
            names = {f.name for f in fields(block_cls)}
            kw = {}
            for key, raw in parser[sec].items():
                if key not in names:
                    raise ConfigError(f"unknown key [{sec}] {key}")
                try:
                    kw[key] = _coerce(block_cls, key, raw)
                except ValueError as exc:
                    raise ConfigError(f"bad value for [{sec}] {key}: {raw!r}") from exc
            setattr(cfg, sec, replace(getattr(cfg, sec), **kw))
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path):
        with open(path) as fh:
            return cls.from_string(fh.read())

    def to_string(self):
        lines = ["[experiment]", f"seed = {self.seed}", ""]
        for sec in _SECTIONS:
            lines.append(f"[{sec}]")
            block = getattr(self, sec)
            for f in fields(block):
                val = getattr(block, f.name)
                lines.append(f"{f.name} = {'' if val is None else val}")
            lines.append("")
        return "\n".join(lines)

    def validate(self):
        """Check every block by building the objects it describes."""
        try:
            if self.data.measured == "":
                canonical_label(self.data.phantom)
            self.build_geometry()
            prior = self.build_prior()
            self.build_dram(prior)
            self.build_sweep_grid()
        except ReconError as exc:
            raise ConfigError(f"invalid config: {exc}") from exc
        m = self.model
        if m.control_points < m.degree + 1:
            raise ConfigError("need at least degree + 1 control points",
                              control_points=m.control_points, degree=m.degree)
        if m.n < 8:
            raise ConfigError("working grid must be at least 8 pixels")
        if self.data.measured and self.data.noise_sigma is None:
            raise ConfigError("measured data needs data.noise_sigma")
        if self.data.measured and self.data.measured_views % self.geometry.views:
            raise ConfigError("geometry.views must divide data.measured_views")
        if self.output.svg_samples < 360:
            raise ConfigError("svg_samples must be >= 360")
        return self

    def build_geometry(self):
        return self.geometry.build()

    def build_full_geometry(self):
        """Geometry of the full measured scan before view subsampling."""
        return replace(self.geometry, views=self.data.measured_views).build()

    def build_prior(self):
        p = self.prior
        return PriorSpec.default(self.model.control_points, width=self.geometry.width,
                                 prior_r=p.prior_r, prior_c=p.prior_c, sigma_r=p.sigma_r,
                                 sigma_theta=p.sigma_theta, sigma_c=p.sigma_c, r_max=p.r_max,
                                 window_half=p.window_half, osc_k=p.osc_k,
                                 enforce_no_intersection=p.no_intersection)

    def build_dram(self, prior=None, n_iter=None):
        d = self.dram
        k = self.model.control_points
        init = initial_state(k, width=self.geometry.width, radius_fraction=d.init_radius_fraction,
                             c=d.init_c)
        return DramConfig(n_iter=int(n_iter or d.n_iter), n0=d.n0, adapt_interval=d.adapt_interval,
                          dr_stages=d.dr_stages, dr_scale=d.dr_scale, init=init, seed=self.seed,
                          burn_in=d.burn_in, adapt=d.adapt,
                          proposal_cov=default_proposal_cov(k, d.sd_r, d.sd_theta, d.sd_c),
                          ridge=d.ridge, adapt_memory=d.adapt_memory, block=d.block,
                          gibbs_c=d.gibbs_c, anneal_fraction=d.anneal_fraction,
                          anneal_start=d.anneal_start, adapt_scale=d.adapt_scale)

    def build_sweep_grid(self):
        t = self.tv
        return SweepGrid.default(n_alpha=t.n_alpha, alpha_range=(t.alpha_min, t.alpha_max),
                                 spacing=t.alpha_spacing, n_beta=t.n_beta,
                                 beta_range=(t.beta_min, t.beta_max))


def bundled_config_path(phantom="omega1"):
    """Path of the config file shipped with the package for ``phantom``."""
    try:
        label = canonical_label(phantom)
    except ReconError as exc:
        raise ConfigError(str(exc)) from exc
    return str(resources.files("nurbsct") / "configs" / f"{label}.ini")


def load_config(path=None, phantom=None):
    """Config from ``path``, else the bundled file for ``phantom`` (default omega1)."""
    if path:
        return ExperimentConfig.from_file(path)
    try:
        return ExperimentConfig.from_file(bundled_config_path(phantom or "omega1"))
    except FileNotFoundError:
        return ExperimentConfig.default(phantom or "omega1").validate()
