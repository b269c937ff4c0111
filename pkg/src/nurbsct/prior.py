"""Log-prior for the NURBS shape parameters.

A Gaussian soft prior around a reference vector, combined with hard
constraints on the control polygon:

(a) angle windows and ordering ``max(th[i-2], lo_i) <= th_i <= min(th[i+2], hi_i)``,
    differences taken on the circle;
(b) radius bounds ``0 <= r_i <= r_max``;
(c) oscillation: ``|P_{i+3} - P_{i+2}| <= k |P_{i+1} - P_i|`` for every ``i``;
(d) no two non-adjacent control-polygon edges intersect.

Violating any clause, or a negative attenuation, gives log-prior ``-inf``.
"""
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import DomainError
from .raster import DEFAULT_WIDTH, ShapeParams

__all__ = ["PriorSpec", "ConstraintReport", "wrap_angle", "log_gaussian_prior",
           "check_hard_constraints", "log_prior"]


def wrap_angle(a):
    """Wrap to ``(-pi, pi]``."""
    a = np.asarray(a, dtype=float)
    return np.pi - np.mod(np.pi - a, 2 * np.pi)


@dataclass(frozen=True)
class PriorSpec:
    center: ShapeParams
    sigma0: np.ndarray
    r_max: float
    window_lo: np.ndarray
    window_hi: np.ndarray
    osc_k: float = 2.0
    enforce_no_intersection: bool = True

    def __post_init__(self):
        d = self.center.vector.size
        sig = np.broadcast_to(np.asarray(self.sigma0, dtype=float), (d,)).copy()
        lo = np.asarray(self.window_lo, dtype=float).ravel()
        hi = np.asarray(self.window_hi, dtype=float).ravel()
        if np.any(sig <= 0):
            raise DomainError("prior standard deviations must be positive")
        if not self.r_max > 0 or not self.osc_k > 0:
            raise DomainError("r_max and osc_k must be positive", r_max=self.r_max, osc_k=self.osc_k)
        if lo.shape != (self.center.n_points,) or hi.shape != lo.shape:
            raise DomainError("one angle window per control point required")
        if np.any(hi <= lo) or np.any(hi - lo >= 2 * np.pi):
            raise DomainError("angle windows need lo < hi and width below 2*pi")
        for name, arr in (("sigma0", sig), ("window_lo", lo), ("window_hi", hi)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_points(self):
        return self.center.n_points

    @property
    def dim(self):
        return 2 * self.n_points + 1

    @classmethod
    def default(cls, n_points, width=DEFAULT_WIDTH, prior_r=32.0, prior_c=0.1,
                sigma_r=10.0, sigma_theta=None, sigma_c=0.05, r_max=None,
                window_half=None, osc_k=2.0, enforce_no_intersection=True, phase=0.0):
        center = ShapeParams.circle(n_points, prior_r, prior_c, phase=phase)
        step = np.pi / n_points
        sigma_theta = step if sigma_theta is None else sigma_theta
        half = step if window_half is None else window_half
        sig = np.empty(2 * n_points + 1)
        sig[0:-1:2] = sigma_r
        sig[1:-1:2] = sigma_theta
        sig[-1] = sigma_c
        r_max = width / np.sqrt(2.0) if r_max is None else r_max
        return cls(center, sig, float(r_max), center.angles - half, center.angles + half,
                   float(osc_k), bool(enforce_no_intersection))

    def relabel(self, shift):
        """Same prior with control points cyclically relabelled by ``shift``."""
        c = self.center
        sig = self.sigma0
        sig_pts = np.roll(sig[:-1].reshape(-1, 2), -shift, axis=0).ravel()
        return PriorSpec(ShapeParams(np.roll(c.radii, -shift), np.roll(c.angles, -shift), c.c),
                         np.append(sig_pts, sig[-1]), self.r_max,
                         np.roll(self.window_lo, -shift), np.roll(self.window_hi, -shift),
                         self.osc_k, self.enforce_no_intersection)

    def to_items(self):
        """Flat key-value form used by the experiment config file."""
        sig = self.sigma0
        return {
            "control_points": self.n_points,
            "prior_r": _scalar_or_list(self.center.radii),
            "prior_theta": _scalar_or_list(self.center.angles),
            "prior_c": self.center.c,
            "sigma_r": _scalar_or_list(sig[0:-1:2]),
            "sigma_theta": _scalar_or_list(sig[1:-1:2]),
            "sigma_c": float(sig[-1]),
            "r_max": self.r_max,
            "window_lo": _scalar_or_list(self.window_lo),
            "window_hi": _scalar_or_list(self.window_hi),
            "osc_k": self.osc_k,
            "no_intersection": self.enforce_no_intersection,
        }

    @classmethod
    def from_items(cls, items):
        n = int(items["control_points"])

        def vec(key):
            return np.broadcast_to(np.asarray(_parse_list(items[key]), dtype=float), (n,)).copy()

        center = ShapeParams(vec("prior_r"), vec("prior_theta"), float(items["prior_c"]))
        sig = np.empty(2 * n + 1)
        sig[0:-1:2] = vec("sigma_r")
        sig[1:-1:2] = vec("sigma_theta")
        sig[-1] = float(items["sigma_c"])
        flag = items.get("no_intersection", True)
        if isinstance(flag, str):
            flag = flag.strip().lower() in ("1", "true", "yes", "on")
        return cls(center, sig, float(items["r_max"]), vec("window_lo"), vec("window_hi"),
                   float(items.get("osc_k", 2.0)), bool(flag))


def _scalar_or_list(a):
    a = np.asarray(a, dtype=float)
    if np.all(a == a[0]):
        return float(a[0])
    return " ".join(repr(float(x)) for x in a)


def _parse_list(val):
    if isinstance(val, str):
        return [float(x) for x in val.replace(",", " ").split()]
    return val


def _as_vector(v, spec):
    vec = v.vector if isinstance(v, ShapeParams) else np.asarray(v, dtype=float).ravel()
    if vec.size != spec.dim:
        raise DomainError("parameter vector does not match prior dimension",
                          size=vec.size, expected=spec.dim)
    return vec


def log_gaussian_prior(v, spec):
    """``-|v - v_ref|^2 / (2 sigma0^2)`` with angle differences wrapped."""
    vec = _as_vector(v, spec)
    diff = vec - spec.center.vector
    diff[1:-1:2] = wrap_angle(diff[1:-1:2])
    z = diff / spec.sigma0
    return -0.5 * float(z @ z)


@dataclass
class ConstraintReport:
    violations: list = field(default_factory=list)

    @property
    def ok(self):
        return not self.violations

    def __bool__(self):
        return self.ok

    def clauses(self):
        return sorted({c for c, _ in self.violations})

    def __str__(self):
        if self.ok:
            return "pass"
        return "; ".join(f"({c}) at {idx}" for c, idx in self.violations)


def check_hard_constraints(v, spec, degree=None):
    """Classify ``v`` against every hard constraint, listing each violation.

    ``degree`` is accepted for symmetry with the forward model; the
    constraints act on the control polygon only.
    """
    vec = _as_vector(v, spec)
    r = vec[0:-1:2]
    th = vec[1:-1:2]
    rep = ConstraintReport()
    win = kernels.window_ok_np(th, spec.window_lo, spec.window_hi)
    order = kernels.ordering_ok_np(th)
    for i in np.nonzero(~(win & order))[0]:
        rep.violations.append(("a", int(i)))
    for i in np.nonzero(~((r >= 0) & (r <= spec.r_max)))[0]:
        rep.violations.append(("b", int(i)))
    x, y = r * np.cos(th), r * np.sin(th)
    for i in np.nonzero(~kernels.oscillation_ok_np(x, y, spec.osc_k))[0]:
        rep.violations.append(("c", int(i)))
    if spec.enforce_no_intersection:
        for i, j in kernels.crossing_pairs_np(x, y):
            rep.violations.append(("d", (int(i), int(j))))
    if not vec[-1] >= 0:
        rep.violations.append(("attenuation", spec.n_points))
    return rep


def constraints_pass(vec, spec):
    """Fast boolean form of :func:`check_hard_constraints` for a flat vector."""
    if not vec[-1] >= 0:
        return False
    code = kernels.constraints_code(np.ascontiguousarray(vec[0:-1:2]),
                                    np.ascontiguousarray(vec[1:-1:2]),
                                    spec.window_lo, spec.window_hi, spec.r_max,
                                    spec.osc_k, spec.enforce_no_intersection)
    return code == 0


def log_prior(v, spec, degree=None):
    vec = _as_vector(v, spec)
    if not constraints_pass(vec, spec):
        return -np.inf
    return log_gaussian_prior(vec, spec)
