"""Fan-beam pencil-beam system matrix.

Entry ``(i, j)`` of the matrix is the length of ray ``i`` inside pixel ``j``,
found with a Siddon-style parametric traversal of the pixel grid.  Lengths
are in the physical units of the geometry's ``width`` so that matrices built
at different resolutions over the same square describe the same measurement.
"""
from dataclasses import dataclass, field
import math

import numpy as np
import scipy.sparse as sp

from . import kernels
from .errors import DomainError
from .raster import DEFAULT_WIDTH, RasterImage, ShapeParams, support_mask

__all__ = ["FanBeamGeometry", "SystemMatrix", "Sinogram", "MatrixCache",
           "build_matrix", "project", "forward", "ray_endpoints"]


@dataclass(frozen=True)
class FanBeamGeometry:
    num_views: int
    source_radius: float
    detector_radius: float
    num_detector_bins: int
    detector_span: float
    width: float = DEFAULT_WIDTH
    start_angle: float = 0.0

    def __post_init__(self):
        if self.num_views < 1 or self.num_detector_bins < 1:
            raise DomainError("need at least one view and one detector bin",
                              views=self.num_views, bins=self.num_detector_bins)
        if self.width <= 0:
            raise DomainError("image width must be positive", width=self.width)
        if not self.source_radius > self.width / math.sqrt(2):
            raise DomainError("source must lie outside the image disc",
                              source_radius=self.source_radius)
        if not 0 < self.detector_span < math.pi:
            raise DomainError("fan opening must be in (0, pi)", span=self.detector_span)

    @classmethod
    def default(cls, width=DEFAULT_WIDTH, num_views=6, num_detector_bins=None,
                source_radius=None, detector_radius=None, margin=0.10):
        """Fan with source/detector at twice the width, covering the image disc."""
        rs = 2.0 * width if source_radius is None else float(source_radius)
        rd = 2.0 * width if detector_radius is None else float(detector_radius)
        half_fan = math.asin(width / math.sqrt(2) / rs) * (1.0 + margin)
        bins = math.ceil(1.5 * width) if num_detector_bins is None else int(num_detector_bins)
        return cls(int(num_views), rs, rd, bins, 2.0 * half_fan, float(width))

    @property
    def view_angles(self):
        return self.start_angle + 2.0 * np.pi * np.arange(self.num_views) / self.num_views

    @property
    def num_rays(self):
        return self.num_views * self.num_detector_bins

    def fan_angles(self):
        nb = self.num_detector_bins
        return (np.arange(nb) + 0.5 - nb / 2.0) * (self.detector_span / nb)

    def subsample(self, keep):
        return FanBeamGeometry(int(keep), self.source_radius, self.detector_radius,
                               self.num_detector_bins, self.detector_span, self.width,
                               self.start_angle)

    def to_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def ray_endpoints(geom):
    """Source and far-end points of every ray, view-major; shapes ``(rays,)``."""
    beta = np.repeat(geom.view_angles, geom.num_detector_bins)
    gamma = np.tile(geom.fan_angles(), geom.num_views)
    sx = geom.source_radius * np.cos(beta)
    sy = geom.source_radius * np.sin(beta)
    phi = beta + np.pi + gamma
    reach = geom.source_radius + geom.detector_radius
    return sx, sy, sx + reach * np.cos(phi), sy + reach * np.sin(phi)


@dataclass(frozen=True)
class Sinogram:
    values: np.ndarray
    views: int
    bins: int

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float).ravel()
        if vals.size != self.views * self.bins:
            raise DomainError("sinogram size does not match views*bins",
                              size=vals.size, views=self.views, bins=self.bins)
        object.__setattr__(self, "values", vals)

    def as_2d(self):
        return self.values.reshape(self.views, self.bins)

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)


@dataclass(frozen=True, eq=False)
class SystemMatrix:
    csr: sp.csr_matrix
    geometry: FanBeamGeometry
    n: int

    @property
    def shape(self):
        return self.csr.shape

    def matvec(self, x):
        return self.csr @ np.asarray(x, dtype=float).ravel()

    def rmatvec(self, y):
        return self.csr.T @ np.asarray(y, dtype=float).ravel()

    def project_mask(self, mask):
        """Sum of lengths over the pixels of a boolean support, per ray."""
        return self.csr @ np.asarray(mask, dtype=float).ravel()

    def entries(self):
        coo = self.csr.tocoo()
        return coo.row, coo.col, coo.data


def build_matrix(geom, n):
    """Exact ray-in-pixel lengths for ``geom`` over an ``n x n`` grid."""
    if int(n) <= 0:
        raise DomainError("grid side must be positive", n=n)
    n = int(n)
    sx, sy, dx, dy = ray_endpoints(geom)
    rows, cols, vals = kernels.siddon(sx, sy, dx, dy, n, float(geom.width))
    csr = sp.csr_matrix((vals, (rows, cols)), shape=(geom.num_rays, n * n))
    csr.sort_indices()
    return SystemMatrix(csr, geom, n)


@dataclass
class MatrixCache:
    """Explicit memo of system matrices keyed by ``(geometry, n)``."""

    _store: dict = field(default_factory=dict)

    def get(self, geom, n):
        key = (geom, int(n))
        if key not in self._store:
            self._store[key] = build_matrix(geom, n)
        return self._store[key]

    def __len__(self):
        return len(self._store)


def project(A, img):
    vals = np.asarray(img.values if isinstance(img, RasterImage) else img, dtype=float)
    if vals.size != A.shape[1]:
        raise DomainError("image size does not match system matrix",
                          pixels=vals.size, columns=A.shape[1])
    g = A.geometry
    return Sinogram(A.matvec(vals), g.num_views, g.num_detector_bins)


def forward(v, geom, n, degree=3, cache=None):
    """``A(B(v))``: rasterize then project, reusing matrices from ``cache``."""
    A = cache.get(geom, n) if cache is not None else build_matrix(geom, n)
    vec = v.vector if isinstance(v, ShapeParams) else np.asarray(v, dtype=float)
    mask = support_mask(vec, n, degree=degree, width=geom.width)
    return Sinogram(vec[-1] * A.project_mask(mask), geom.num_views, geom.num_detector_bins)
