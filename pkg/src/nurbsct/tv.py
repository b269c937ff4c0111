"""Total-variation regularized pixel reconstruction and the thresholded baseline.

The objective ``|A x - m|^2 + alpha * TV(x)`` (anisotropic TV, optional
``x >= 0``) is minimized with monotone FISTA.  The proximal step of
``TV + indicator(x >= 0)`` is solved in the dual by the fast gradient
projection method, warm-started from the previous outer iteration.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import logging

import numpy as np

from . import metrics
from .errors import DomainError
from .raster import DEFAULT_WIDTH, RasterImage

__all__ = ["TvProblem", "TvResult", "SweepGrid", "SweepResult", "tv_value", "tv_reconstruct",
           "threshold", "optimal_sweep", "operator_norm_sq"]

log = logging.getLogger(__name__)


def tv_value(img):
    """Anisotropic TV: sum of absolute horizontal and vertical neighbour differences."""
    b = np.asarray(getattr(img, "values", img), dtype=float)
    if b.ndim != 2 or min(b.shape) < 2:
        raise DomainError("tv_value needs a 2-D image of side >= 2", shape=b.shape)
    return float(np.abs(np.diff(b, axis=1)).sum() + np.abs(np.diff(b, axis=0)).sum())


@dataclass
class TvProblem:
    A: object
    m: object
    n: int
    alpha: float
    nonneg: bool = True
    width: float = None

    def __post_init__(self):
        if self.width is None:
            geom = getattr(self.A, "geometry", None)
            self.width = geom.width if geom is not None else DEFAULT_WIDTH
        self.A = getattr(self.A, "csr", self.A)
        if not self.alpha > 0:
            raise DomainError("alpha must be positive", alpha=self.alpha)
        self.m = np.asarray(getattr(self.m, "values", self.m), dtype=float).ravel()
        shape = self.A.shape
        if shape != (self.m.size, self.n * self.n):
            raise DomainError("system matrix, data and grid sizes disagree",
                              matrix=shape, data=self.m.size, n=self.n)

    def with_alpha(self, alpha):
        return TvProblem(self.A, self.m, self.n, alpha, self.nonneg, self.width)

    def objective(self, x):
        x = np.asarray(x, dtype=float)
        r = self.A @ x.ravel() - self.m
        return float(r @ r) + self.alpha * tv_value(x.reshape(self.n, self.n))


@dataclass
class TvResult:
    image: RasterImage
    objective: float
    history: list
    converged: bool
    iterations: int


def operator_norm_sq(A, iters=100, tol=1e-10):
    """Largest eigenvalue of ``A^T A`` by power iteration from a fixed start."""
    v = np.ones(A.shape[1]) / np.sqrt(A.shape[1])
    lam = 0.0
    for _ in range(iters):
        w = A.T @ (A @ v)
        new = float(np.linalg.norm(w))
        if new == 0:
            return 0.0
        v = w / new
        if abs(new - lam) <= tol * new:
            return new
        lam = new
    return lam


def _grad_T(x):
    """Adjoint of the dual divergence: forward differences down and right."""
    return x[:-1, :] - x[1:, :], x[:, :-1] - x[:, 1:]


def _div(p, q):
    n0, n1 = p.shape[0] + 1, q.shape[1] + 1
    out = np.zeros((n0, n1))
    out[:-1, :] += p
    out[1:, :] -= p
    out[:, :-1] += q
    out[:, 1:] -= q
    return out


def _prox_tv(b, lam, nonneg, dual, inner):
    """``argmin_x |x - b|^2 + 2 lam TV(x)`` over ``x >= 0`` (if ``nonneg``)."""
    if lam == 0:
        return np.maximum(b, 0.0) if nonneg else b.copy(), dual
    p, q = dual
    r, s = p.copy(), q.copy()
    t = 1.0
    step = 1.0 / (8.0 * lam)
    for _ in range(inner):
        x = b - lam * _div(r, s)
        if nonneg:
            np.maximum(x, 0.0, out=x)
        gp, gq = _grad_T(x)
        p_new = np.clip(r + step * gp, -1.0, 1.0)
        q_new = np.clip(s + step * gq, -1.0, 1.0)
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        w = (t - 1.0) / t_new
        r = p_new + w * (p_new - p)
        s = q_new + w * (q_new - q)
        p, q, t = p_new, q_new, t_new
    x = b - lam * _div(p, q)
    if nonneg:
        np.maximum(x, 0.0, out=x)
    return x, (p, q)


def tv_reconstruct(prob, tol=1e-6, max_iter=1000, inner=40, lipschitz=None, x0=None):
    """Approximate minimizer of ``|A x - m|^2 + alpha TV(x)``.

    Monotone FISTA: each iterate is the better of the proximal point and the
    previous iterate, so the recorded objective never increases.  Stops when,
    for 5 consecutive iterations, the relative objective decrease is below
    ``tol`` and the proximal-gradient step is below ``sqrt(tol)`` relative to
    the iterate; otherwise returns after ``max_iter`` with ``converged=False``.
    """
    if not tol > 0:
        raise DomainError("tol must be positive", tol=tol)
    n = prob.n
    A = prob.A
    L = 2.0 * (operator_norm_sq(A) if lipschitz is None else lipschitz)
    if L == 0:
        raise DomainError("system matrix is zero")
    x = np.zeros((n, n)) if x0 is None else np.asarray(x0, dtype=float).reshape(n, n).copy()
    fx = prob.objective(x)
    y = x.copy()
    t = 1.0
    dual = (np.zeros((n - 1, n)), np.zeros((n, n - 1)))
    history = [fx]
    lam = prob.alpha / L
    quiet = 0
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        g = 2.0 * (A.T @ (A @ y.ravel() - prob.m)).reshape(n, n)
        z, dual = _prox_tv(y - g / L, lam, prob.nonneg, dual, inner)
        y_prev = y
        fz = prob.objective(z)
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        if fz <= fx:
            x_new, f_new = z, fz
        else:
            x_new, f_new = x, fx
        y = x_new + (t / t_new) * (z - x_new) + ((t - 1.0) / t_new) * (x_new - x)
        rel = (fx - f_new) / max(abs(f_new), 1e-300)
        step = np.linalg.norm(z - y_prev) / max(np.linalg.norm(z), 1e-300)
        x, fx, t = x_new, f_new, t_new
        history.append(fx)
        quiet = quiet + 1 if (rel <= tol and step <= np.sqrt(tol)) else 0
        if quiet >= 5:
            converged = True
            break
    if not converged:
        log.debug("TV solver hit max_iter=%d (alpha=%g)", max_iter, prob.alpha)
    return TvResult(RasterImage(x, width=prob.width), fx, history, converged, it)


def _threshold_values(b, beta):
    return np.where(b >= beta, beta, 0.0)


def threshold(img, beta):
    """Binarize: values ``>= beta`` become ``beta``, the rest 0."""
    img = img if isinstance(img, RasterImage) else RasterImage(np.asarray(img, dtype=float))
    top = float(img.values.max())
    if not 0 < beta <= top:
        raise DomainError("threshold must satisfy 0 < beta <= max pixel value", beta=beta, max=top)
    return RasterImage(_threshold_values(img.values, beta), width=img.width)


@dataclass(frozen=True)
class SweepGrid:
    alphas: tuple
    betas: tuple

    def __post_init__(self):
        for name in ("alphas", "betas"):
            vals = np.asarray(getattr(self, name), dtype=float).ravel()
            if vals.size == 0 or np.any(vals <= 0) or np.any(np.diff(vals) <= 0):
                raise DomainError(f"{name} must be positive and strictly increasing")
            object.__setattr__(self, name, tuple(float(v) for v in vals))

    @classmethod
    def default(cls, n_alpha=30, alpha_range=(1e-6, 100.0), spacing="log",
                n_beta=201, beta_range=(0.01, 0.03)):
        lo, hi = alpha_range
        if spacing == "log":
            alphas = np.logspace(np.log10(lo), np.log10(hi), n_alpha)
        elif spacing == "linear":
            alphas = np.linspace(lo, hi, n_alpha)
        else:
            raise DomainError("alpha spacing must be 'log' or 'linear'", spacing=spacing)
        return cls(tuple(alphas), tuple(np.linspace(beta_range[0], beta_range[1], n_beta)))

    @property
    def size(self):
        return len(self.alphas) * len(self.betas)


@dataclass
class SweepResult:
    alpha: float
    beta: float
    error: float
    table: list
    reconstruction: TvResult = None
    image: RasterImage = None
    converged: dict = field(default_factory=dict)


def optimal_sweep(template, grid, truth, tol=1e-6, max_iter=1000, workers=1):
    """Exhaustive ``(alpha, beta)`` search for the least thresholded-TV shape error.

    ``template`` supplies ``A``, ``m``, ``n`` and ``nonneg``; its ``alpha`` is
    ignored.  A threshold above every pixel value empties the image, which is
    scored like any other support.  Ties go to the smaller alpha, then the
    smaller beta.  The table lists ``(alpha, beta, error)`` with alpha as the
    outer loop.
    """
    truth_vals = np.asarray(getattr(truth, "values", truth), dtype=float)
    if np.unique(truth_vals).size > 2:
        raise DomainError("truth image must be binary")
    template = template.with_alpha(1.0)
    L = operator_norm_sq(template.A)

    def solve(alpha):
        return tv_reconstruct(template.with_alpha(alpha), tol=tol, max_iter=max_iter, lipschitz=L)

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            recs = list(ex.map(solve, grid.alphas))
    else:
        recs = [solve(a) for a in grid.alphas]

    table = []
    best = None
    for ia, (alpha, rec) in enumerate(zip(grid.alphas, recs)):
        for beta in grid.betas:
            err = metrics.shape_error(truth_vals, _threshold_values(rec.image.values, beta))
            table.append((alpha, beta, err))
            if best is None or err < best[2]:
                best = (alpha, beta, err, ia)
    alpha, beta, err, ia = best
    rec = recs[ia]
    img = RasterImage(_threshold_values(rec.image.values, beta), width=rec.image.width)
    return SweepResult(alpha, beta, err, table, rec, img,
                       {a: r.converged for a, r in zip(grid.alphas, recs)})
