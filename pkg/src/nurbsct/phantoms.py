"""Simulated phantoms, synthetic data and measured-data ingestion.

The phantoms are analytic outlines, not NURBS curves, so that reconstructing
them is not an inverse crime.  Both live in the same centred physical frame
as the rasterizer and are defined relative to the image width, so they can
be sampled at any resolution.
"""
from dataclasses import dataclass, replace

import numpy as np

from .errors import DomainError
from .projector import FanBeamGeometry, MatrixCache, Sinogram, build_matrix
from .raster import DEFAULT_WIDTH, RasterImage, pixel_centres

__all__ = ["PHANTOM_VALUE", "Phantom", "MeasurementData", "make_phantom", "phantom_mask",
           "simulate_data", "normalize_measured", "subsample_views", "canonical_label"]

PHANTOM_VALUE = 0.027

_ALIASES = {
    "omega1": "omega1", "Ω1": "omega1", "o1": "omega1", "1": "omega1", "convex": "omega1",
    "omega2": "omega2", "Ω2": "omega2", "o2": "omega2", "2": "omega2", "nonconvex": "omega2",
}

# outline parameters as fractions of the image width
_PENTA_R = 0.30
_PENTA_SCALE = (1.15, 0.88)
_ROUND = 0.07
# (apex_x, apex_y, direction of the opening, half-angle)
_WEDGES = (
    (-0.03, 0.18, np.pi / 2, np.deg2rad(50.0)),
    (0.04, -0.135, -np.pi / 2, np.deg2rad(50.0)),
)


def canonical_label(label):
    key = str(label).strip().lower() if str(label) not in _ALIASES else str(label)
    if key not in _ALIASES:
        raise DomainError(f"unknown phantom label {label!r}", label=label)
    return _ALIASES[key]


def _pentagon(width):
    ang = np.pi / 2 + 2 * np.pi * np.arange(5) / 5
    sx, sy = _PENTA_SCALE
    return np.column_stack([sx * _PENTA_R * width * np.cos(ang),
                            sy * _PENTA_R * width * np.sin(ang)])


def _inside_convex(x, y, poly):
    inside = np.ones(x.shape, dtype=bool)
    for k in range(len(poly)):
        a, b = poly[k], poly[(k + 1) % len(poly)]
        inside &= (b[0] - a[0]) * (y - a[1]) - (b[1] - a[1]) * (x - a[0]) >= 0
    return inside


def _dist_to_polygon(x, y, poly):
    d = np.full(x.shape, np.inf)
    for k in range(len(poly)):
        a, b = poly[k], poly[(k + 1) % len(poly)]
        ab = b - a
        t = np.clip(((x - a[0]) * ab[0] + (y - a[1]) * ab[1]) / (ab @ ab), 0.0, 1.0)
        d = np.minimum(d, np.hypot(x - a[0] - t * ab[0], y - a[1] - t * ab[1]))
    return d


def phantom_mask(label, x, y, width=DEFAULT_WIDTH):
    """Analytic membership test at centred coordinates ``(x, y)``."""
    label = canonical_label(label)
    poly = _pentagon(width)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    inside = _inside_convex(x, y, poly) | (_dist_to_polygon(x, y, poly) <= _ROUND * width)
    if label == "omega2":
        for ax, ay, direction, half in _WEDGES:
            dx = x - ax * width
            dy = y - ay * width
            off = np.angle(np.exp(1j * (np.arctan2(dy, dx) - direction)))
            inside &= ~(np.abs(off) < half)
    return inside


@dataclass(frozen=True)
class Phantom:
    image: RasterImage
    label: str


def make_phantom(label, n=256, width=DEFAULT_WIDTH, value=PHANTOM_VALUE):
    """Binary phantom image sampled at pixel centres of an ``n x n`` grid."""
    label = canonical_label(label)
    xc, yc = pixel_centres(int(n), width)
    X, Y = np.meshgrid(xc, yc)
    img = np.where(phantom_mask(label, X, Y, width), value, 0.0)
    return Phantom(RasterImage(img, width=width), label)


@dataclass(frozen=True)
class MeasurementData:
    sinogram: Sinogram
    geometry: FanBeamGeometry
    noise_sigma: float
    provenance: str = "simulated"

    def __post_init__(self):
        if self.noise_sigma < 0:
            raise DomainError("noise level must be non-negative", sigma=self.noise_sigma)
        g = self.geometry
        if (self.sinogram.views, self.sinogram.bins) != (g.num_views, g.num_detector_bins):
            raise DomainError("sinogram layout does not match geometry")


def simulate_data(ph, geom, noise_percent=0.1, seed=0, cache=None, reference="max"):
    """Project ``ph`` and add i.i.d. Gaussian noise.

    The noise standard deviation is ``noise_percent / 100`` times the maximum
    (``reference="max"``) or mean absolute value of the clean sinogram.
    """
    if noise_percent < 0:
        raise DomainError("noise percentage must be >= 0", noise_percent=noise_percent)
    if abs(ph.image.width - geom.width) > 1e-12:
        raise DomainError("phantom and geometry widths differ")
    A = cache.get(geom, ph.image.side) if cache is not None else build_matrix(geom, ph.image.side)
    clean = A.matvec(ph.image.values)
    if reference == "max":
        scale = np.max(np.abs(clean))
    elif reference == "mean":
        scale = np.mean(np.abs(clean))
    else:
        raise DomainError("noise reference must be 'max' or 'mean'", reference=reference)
    sigma = noise_percent / 100.0 * scale
    rng = np.random.default_rng(seed)
    noisy = clean + sigma * rng.standard_normal(clean.size) if sigma > 0 else clean.copy()
    return MeasurementData(Sinogram(noisy, geom.num_views, geom.num_detector_bins), geom, sigma)


def normalize_measured(raw, floor=0.1):
    """``max(log raw) - log raw`` with entries below ``floor`` zeroed."""
    vals = np.asarray(getattr(raw, "values", raw), dtype=float)
    bad = np.nonzero(~(vals > 0))[0]
    if bad.size:
        raise DomainError(f"non-positive raw intensity at bin {int(bad[0])}",
                          bin=int(bad[0]), value=float(vals[bad[0]]))
    lg = np.log(vals)
    out = lg.max() - lg
    out[out < floor] = 0.0
    if isinstance(raw, Sinogram):
        return Sinogram(out, raw.views, raw.bins)
    return out


def subsample_views(full, keep):
    """Every ``(num_views // keep)``-th view of a dataset; ``keep`` must divide it."""
    views = full.geometry.num_views
    keep = int(keep)
    if keep < 1 or views % keep:
        raise DomainError(f"{keep} views do not evenly subsample {views}", keep=keep, views=views)
    step = views // keep
    sino = full.sinogram.as_2d()[::step]
    geom = full.geometry.subsample(keep)
    return replace(full, sinogram=Sinogram(sino, keep, sino.shape[1]), geometry=geom)
