"""Closed NURBS curves on periodic uniform knot vectors.

A closed curve with ``n + 1`` control points of degree ``p`` is built the
usual unclamped way: the first ``p`` points are appended after the last one
and the curve is evaluated on a uniform knot vector of ``K = n + 2p + 2``
breakpoints.  The user parameter ``u`` in ``[0, 1]`` is mapped affinely onto
the knot interval ``[t_p, t_{K-1-p}]`` (0-based) on which every basis function
of the extended list is complete, so ``S(0) == S(1)``.

Basis values fed back onto the original ``n + 1`` points (wrapped copies are
summed) give the rational basis ``R_i(u)`` with ``S(u) = sum_i p_i R_i(u)``.
"""
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DegenerateError, DomainError

__all__ = [
    "KnotVector",
    "ControlPoint",
    "NurbsCurve",
    "basis",
    "basis_matrix",
    "rational_basis",
    "eval_curve",
    "sample_polyline",
    "polyline_operator",
]


@dataclass(frozen=True)
class KnotVector:
    knots: tuple

    def __post_init__(self):
        k = np.asarray(self.knots, dtype=float)
        if k.ndim != 1 or k.size < 2:
            raise DomainError("knot vector needs at least two entries")
        if np.any(np.diff(k) < 0):
            raise DomainError("knot vector must be non-decreasing")
        if k[0] != 0.0 or k[-1] != 1.0:
            raise DomainError("knot vector must start at 0 and end at 1")
        object.__setattr__(self, "knots", tuple(float(x) for x in k))

    @classmethod
    def periodic_uniform(cls, size):
        """``size`` equally spaced breakpoints ``0, 1/(size-1), ..., 1``."""
        if size < 2:
            raise DomainError("knot vector needs at least two entries", size=size)
        return cls(tuple(np.linspace(0.0, 1.0, size)))

    @property
    def array(self):
        return np.asarray(self.knots)

    def __len__(self):
        return len(self.knots)

    def is_periodic_uniform(self, tol=1e-12):
        k = self.array
        return bool(np.all(np.abs(np.diff(k) - 1.0 / (k.size - 1)) < tol))


@dataclass(frozen=True)
class ControlPoint:
    r: float
    theta: float
    weight: float = 1.0

    def __post_init__(self):
        if not np.isfinite(self.r) or self.r < 0:
            raise DomainError("control point radius must be finite and >= 0", r=self.r)
        if self.weight < 0:
            raise DomainError("control point weight must be >= 0", weight=self.weight)

    @property
    def xy(self):
        return (self.r * np.cos(self.theta), self.r * np.sin(self.theta))


class NurbsCurve:
    """Immutable NURBS curve.

    Parameters
    ----------
    points : array_like, shape (n + 1, 2)
        Cartesian control points.
    degree : int
        Polynomial degree ``p`` of the basis.
    weights : array_like, optional
        Non-negative weights, all ones by default.
    closed : bool
        Build the periodic closed curve (default) or the open unclamped one.
    """

    def __init__(self, points, degree=3, weights=None, closed=True):
        pts = np.array(points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise DomainError("points must have shape (n+1, 2)", shape=pts.shape)
        degree = int(degree)
        if degree < 1:
            raise DomainError("degree must be >= 1", degree=degree)
        if not closed and pts.shape[0] < degree + 1:
            raise DomainError("open curve needs at least degree+1 points",
                              points=pts.shape[0], degree=degree)
        if closed and pts.shape[0] < 2:
            raise DomainError("closed curve needs at least two points")
        w = np.ones(pts.shape[0]) if weights is None else np.array(weights, dtype=float)
        if w.shape != (pts.shape[0],):
            raise DomainError("one weight per control point required", shape=w.shape)
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise DomainError("weights must be finite and non-negative")
        pts.setflags(write=False)
        w.setflags(write=False)
        self.points = pts
        self.weights = w
        self.degree = degree
        self.closed = bool(closed)
        n_ext = pts.shape[0] + (degree if closed else 0)
        self.knots = KnotVector.periodic_uniform(n_ext + degree + 1)

    @classmethod
    def from_polar(cls, radii, angles, degree=3, weights=None, closed=True):
        r = np.asarray(radii, dtype=float)
        th = np.asarray(angles, dtype=float)
        return cls(np.column_stack([r * np.cos(th), r * np.sin(th)]),
                   degree=degree, weights=weights, closed=closed)

    @classmethod
    def from_control_points(cls, cps, degree=3, closed=True):
        cps = list(cps)
        return cls.from_polar([c.r for c in cps], [c.theta for c in cps], degree=degree,
                              weights=[c.weight for c in cps], closed=closed)

    @property
    def n_points(self):
        return self.points.shape[0]

    @property
    def extended_points(self):
        if not self.closed:
            return self.points
        return self.points[np.arange(self.n_points + self.degree) % self.n_points]

    @property
    def extended_weights(self):
        if not self.closed:
            return self.weights
        return self.weights[np.arange(self.n_points + self.degree) % self.n_points]

    @property
    def span(self):
        """Knot interval that the user parameter ``[0, 1]`` maps onto."""
        k = self.knots.array
        return k[self.degree], k[len(k) - 1 - self.degree]

    def knot_parameter(self, u):
        lo, hi = self.span
        return lo + np.asarray(u, dtype=float) * (hi - lo)

    def __repr__(self):
        return (f"NurbsCurve(n_points={self.n_points}, degree={self.degree}, "
                f"closed={self.closed})")


def _check_t(t):
    t = np.asarray(t, dtype=float)
    if np.any(~np.isfinite(t)) or np.any(t < 0.0) or np.any(t > 1.0):
        raise DomainError("parameter must lie in [0, 1]", t=t.tolist())
    return t


def _ratio(num, den):
    return 0.0 if den == 0.0 else num / den


def basis(i, p, t, knots):
    """Cox-de Boor basis function ``N_{i,p}(t)`` by direct recursion.

    The zero-degree functions use half-open intervals, except that ``t = 1``
    belongs to the last non-empty interval.  Any ``0/0`` term contributes 0.
    """
    k = knots.array if isinstance(knots, KnotVector) else np.asarray(knots, dtype=float)
    if p < 0:
        raise DomainError("degree must be >= 0", p=p)
    if i < 0 or i + p + 1 > k.size - 1:
        raise DomainError("basis index out of range", i=i, p=p, n_knots=int(k.size))
    t = float(_check_t(t))
    return _basis_rec(i, p, t, k)


def _basis_rec(i, p, t, k):
    if p == 0:
        if k[i] <= t < k[i + 1]:
            return 1.0
        if t == k[-1] and k[i] < k[i + 1] == k[-1]:
            return 1.0
        return 0.0
    left = _ratio(t - k[i], k[i + p] - k[i])
    right = _ratio(k[i + p + 1] - t, k[i + p + 1] - k[i + 1])
    out = 0.0
    if left != 0.0:
        out += left * _basis_rec(i, p - 1, t, k)
    if right != 0.0:
        out += right * _basis_rec(i + 1, p - 1, t, k)
    return out


def basis_matrix(knots, p, t):
    """All degree-``p`` basis functions at every ``t``; shape ``(len(t), K-p-1)``."""
    k = knots.array if isinstance(knots, KnotVector) else np.asarray(knots, dtype=float)
    t = np.atleast_1d(_check_t(t))[:, None]
    lo, hi = k[:-1], k[1:]
    N = ((lo <= t) & (t < hi)).astype(float)
    # t == 1 falls into the last non-empty interval
    last = np.nonzero(hi > lo)[0][-1]
    N[t[:, 0] == k[-1], last] = 1.0
    for d in range(1, p + 1):
        m = k.size - 1 - d
        den_l = k[d:d + m] - k[:m]
        den_r = k[d + 1:d + 1 + m] - k[1:1 + m]
        with np.errstate(divide="ignore", invalid="ignore"):
            a = np.where(den_l > 0, (t - k[:m]) / np.where(den_l > 0, den_l, 1.0), 0.0)
            b = np.where(den_r > 0, (k[d + 1:d + 1 + m] - t) / np.where(den_r > 0, den_r, 1.0), 0.0)
        N = a * N[:, :m] + b * N[:, 1:m + 1]
    return N


def _folded_basis(curve, u):
    """Rational basis folded onto the original points; shape ``(len(u), n+1)``."""
    u = np.atleast_1d(_check_t(u))
    N = basis_matrix(curve.knots, curve.degree, curve.knot_parameter(u))
    wN = N * curve.extended_weights
    den = wN.sum(axis=1)
    if np.any(den <= 0):
        raise DegenerateError("rational basis denominator vanished (degenerate weights)")
    R = wN / den[:, None]
    if curve.closed:
        n1 = curve.n_points
        folded = R[:, :n1].copy()
        for e in range(n1, R.shape[1]):
            folded[:, e % n1] += R[:, e]
        R = folded
    return R


def rational_basis(i, t, curve):
    """``R_i(t)`` for original control point ``i`` of ``curve``.

    Accepts scalar or array ``t``; a scalar returns a float.
    """
    if not 0 <= i < curve.n_points:
        raise DomainError("control point index out of range", i=i, n_points=curve.n_points)
    R = _folded_basis(curve, t)[:, i]
    return float(R[0]) if np.ndim(t) == 0 else R


def eval_curve(curve, t):
    """Evaluate ``S(t)``; returns shape ``(2,)`` for scalar ``t`` else ``(m, 2)``."""
    out = _folded_basis(curve, t) @ curve.points
    return out[0] if np.ndim(t) == 0 else out


def sample_polyline(curve, m):
    """``S(k/m)`` for ``k = 0..m-1`` as an ``(m, 2)`` closed polyline."""
    if int(m) != m or m < 3:
        raise DomainError("polyline needs at least 3 samples", m=m)
    return eval_curve(curve, np.arange(int(m)) / int(m))


@lru_cache(maxsize=64)
def polyline_operator(n_points, degree, m):
    """Matrix ``R`` with ``R @ points == sample_polyline(curve, m)`` for unit weights.

    Cached and read-only; the sampler reuses it for every proposal.
    """
    dummy = NurbsCurve(np.zeros((n_points, 2)), degree=degree)
    R = _folded_basis(dummy, np.arange(int(m)) / int(m))
    R.setflags(write=False)
    return R
