"""Pixel-centre rasterization of NURBS-bounded shapes.

The raster frame has its origin at the lower-left corner of a square of side
``width`` (physical units, by default one unit per pixel of the 64-pixel
working grid) and control points are polar about the square's centre.  A
pixel belongs to the shape when its centre is inside the closed curve under
the even-odd rule, centres exactly on the polyline counting as inside.
"""
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DomainError
from .nurbs import NurbsCurve, polyline_operator

__all__ = ["ShapeParams", "RasterImage", "polyline_density", "curve_polyline",
           "support_mask", "rasterize", "point_in_curve", "pixel_centres"]

DEFAULT_WIDTH = 64.0


@dataclass(frozen=True)
class ShapeParams:
    """Polar control points plus attenuation, ``v = [r0, th0, ..., rn, thn, c]``."""

    radii: np.ndarray
    angles: np.ndarray
    c: float

    def __post_init__(self):
        r = np.array(self.radii, dtype=float).ravel()
        th = np.array(self.angles, dtype=float).ravel()
        if r.shape != th.shape:
            raise DomainError("radii and angles must have equal length",
                              radii=r.size, angles=th.size)
        r.setflags(write=False)
        th.setflags(write=False)
        object.__setattr__(self, "radii", r)
        object.__setattr__(self, "angles", th)
        object.__setattr__(self, "c", float(self.c))

    @property
    def n_points(self):
        return self.radii.size

    @property
    def vector(self):
        v = np.empty(2 * self.n_points + 1)
        v[0:-1:2] = self.radii
        v[1:-1:2] = self.angles
        v[-1] = self.c
        return v

    @classmethod
    def from_vector(cls, v):
        v = np.asarray(v, dtype=float).ravel()
        if v.size < 3 or v.size % 2 == 0:
            raise DomainError("parameter vector must have odd length 2(n+1)+1", size=v.size)
        return cls(v[0:-1:2], v[1:-1:2], v[-1])

    @classmethod
    def circle(cls, n_points, radius, c, phase=0.0):
        th = phase + 2 * np.pi * np.arange(n_points) / n_points
        return cls(np.full(n_points, float(radius)), th, c)

    def is_valid(self):
        return bool(self.c >= 0 and np.all(self.radii >= 0)
                    and np.all(np.isfinite(self.vector)))

    def curve(self, degree=3):
        return NurbsCurve.from_polar(self.radii, self.angles, degree=degree)


@dataclass(frozen=True)
class RasterImage:
    values: np.ndarray
    width: float = DEFAULT_WIDTH

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 2 or vals.shape[0] != vals.shape[1]:
            raise DomainError("raster images are square", shape=vals.shape)
        object.__setattr__(self, "values", vals)

    @property
    def side(self):
        return self.values.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    @property
    def support(self):
        return self.values > 0


def polyline_density(n_points):
    return max(720, 20 * n_points)


def pixel_centres(n, width=DEFAULT_WIDTH):
    """Centred pixel-centre coordinates ``(xc, yc)``; rows run top to bottom."""
    return kernels._centres(n, width)


def curve_polyline(vec, degree=3, m=None):
    """Dense closed polyline (centred coordinates) for a parameter vector."""
    vec = np.asarray(vec, dtype=float)
    n_points = (vec.size - 1) // 2
    m = polyline_density(n_points) if m is None else m
    R = polyline_operator(n_points, degree, m)
    r = vec[0:-1:2]
    th = vec[1:-1:2]
    px = R @ (r * np.cos(th))
    py = R @ (r * np.sin(th))
    return px, py


def support_mask(vec, n, degree=3, width=DEFAULT_WIDTH, m=None):
    """Boolean ``n x n`` mask of pixel centres enclosed by the curve of ``vec``."""
    px, py = curve_polyline(vec, degree=degree, m=m)
    return kernels.scanline_fill(px, py, int(n), float(width))


def rasterize(v, n, degree=3, width=DEFAULT_WIDTH, m=None):
    """Binary image with value ``c`` inside the curve and 0 outside.

    ``v`` may be a :class:`ShapeParams` or a flat parameter vector.
    """
    if int(n) < 8:
        raise DomainError("raster side must be >= 8", n=n)
    vec = v.vector if isinstance(v, ShapeParams) else np.asarray(v, dtype=float)
    mask = support_mask(vec, n, degree=degree, width=width, m=m)
    return RasterImage(np.where(mask, vec[-1], 0.0), width=width)


def point_in_curve(q, polyline):
    """Even-odd containment of point ``q`` in a closed polyline ``(m, 2)``."""
    poly = np.asarray(polyline, dtype=float)
    if poly.ndim != 2 or poly.shape[0] < 3:
        raise DomainError("polyline needs at least 3 vertices")
    q = np.asarray(q, dtype=float).reshape(-1, 2)
    res = kernels.points_in_polygon(np.ascontiguousarray(q[:, 0]), np.ascontiguousarray(q[:, 1]),
                                    np.ascontiguousarray(poly[:, 0]), np.ascontiguousarray(poly[:, 1]))
    return bool(res[0]) if res.size == 1 else res
