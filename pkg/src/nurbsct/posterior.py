"""Gaussian likelihood and log-posterior for the NURBS shape model."""
import numpy as np
from scipy.special import ndtr, ndtri

from .errors import DomainError
from .prior import constraints_pass, log_gaussian_prior
from .projector import MatrixCache
from .raster import ShapeParams, support_mask

__all__ = ["PosteriorProblem", "default_proposal_cov", "initial_state"]


class PosteriorProblem:
    """Log-posterior ``log prior(v) + log likelihood(v)`` for measured data.

    Parameters
    ----------
    data : MeasurementData
    n : int
        Side of the working pixel grid (the desk-scale runs use 64).
    prior : PriorSpec
    degree : int
        NURBS degree.
    noise_sigma : float, optional
        Likelihood noise level; defaults to ``data.noise_sigma``.
    cache : MatrixCache, optional
        Shared read-only store of system matrices.
    """

    def __init__(self, data, n, prior, degree=3, noise_sigma=None, cache=None):
        self.data = data
        self.geometry = data.geometry
        self.n = int(n)
        self.prior = prior
        self.degree = int(degree)
        sigma = data.noise_sigma if noise_sigma is None else float(noise_sigma)
        if not sigma > 0:
            raise DomainError("likelihood noise sigma must be positive", sigma=sigma)
        self.noise_sigma = sigma
        self.cache = cache if cache is not None else MatrixCache()
        self.A = self.cache.get(self.geometry, self.n)
        self.m = np.asarray(data.sinogram.values, dtype=float)
        self.n_forward = 0
        self.n_calls = 0
        self._inv2s2 = 0.5 / sigma ** 2

    @property
    def dim(self):
        return self.prior.dim

    @property
    def angle_components(self):
        return tuple(range(1, self.dim - 1, 2))

    def _vec(self, v):
        vec = v.vector if isinstance(v, ShapeParams) else np.asarray(v, dtype=float)
        if vec.size != self.dim:
            raise DomainError("parameter vector has wrong size", size=vec.size, expected=self.dim)
        return vec

    def forward(self, v):
        vec = self._vec(v)
        self.n_forward += 1
        mask = support_mask(vec, self.n, degree=self.degree, width=self.geometry.width)
        return vec[-1] * self.A.project_mask(mask)

    def residual(self, v):
        return self.forward(v) - self.m

    def log_likelihood(self, v):
        r = self.residual(v)
        return -self._inv2s2 * float(r @ r)

    def log_posterior(self, v):
        """``-inf`` for infeasible ``v`` without touching the forward model."""
        vec = self._vec(v)
        self.n_calls += 1
        if not constraints_pass(vec, self.prior):
            return -np.inf
        return log_gaussian_prior(vec, self.prior) + self.log_likelihood(vec)

    __call__ = log_posterior

    def log_posterior_parts(self, v):
        """``(log_prior, log_likelihood)``; ``(-inf, 0)`` if infeasible."""
        vec = self._vec(v)
        self.n_calls += 1
        if not constraints_pass(vec, self.prior):
            return -np.inf, 0.0
        return log_gaussian_prior(vec, self.prior), self.log_likelihood(vec)

    def attenuation_conditional(self, v, temperature=1.0):
        """Mean and std of ``c`` given the shape, ignoring ``c >= 0``.

        The forward model is linear in ``c`` and the prior on ``c`` Gaussian,
        so the conditional is Gaussian; also returns the unit-attenuation
        projection of the shape.
        """
        vec = self._vec(v)
        self.n_forward += 1
        mask = support_mask(vec, self.n, degree=self.degree, width=self.geometry.width)
        a = self.A.project_mask(mask)
        s0 = self.prior.sigma0[-1]
        w = 2.0 * self._inv2s2 * temperature
        prec = w * float(a @ a) + 1.0 / s0 ** 2
        mean = (w * float(a @ self.m) + self.prior.center.c / s0 ** 2) / prec
        return mean, 1.0 / np.sqrt(prec), a

    def gibbs_attenuation(self, v, u, temperature=1.0):
        """Exact draw of ``c`` from its conditional truncated to ``c >= 0``.

        ``u`` is a uniform variate in [0, 1) fed through the inverse CDF; the
        likelihood is raised to ``temperature``.  Returns the new vector and
        its ``(log_prior, log_likelihood)``.
        """
        vec = self._vec(v).copy()
        mean, sd, a = self.attenuation_conditional(vec, temperature)
        lo = ndtr(-mean / sd)
        p = lo + u * (1.0 - lo)
        c = mean + sd * ndtri(min(max(p, 1e-300), 1.0 - 1e-16))
        vec[-1] = max(c, 0.0)
        r = vec[-1] * a - self.m
        return vec, (log_gaussian_prior(vec, self.prior), -self._inv2s2 * float(r @ r))


def default_proposal_cov(n_points, sd_r=0.5, sd_theta=np.pi / 180, sd_c=0.01):
    d = 2 * n_points + 1
    diag = np.empty(d)
    diag[0:-1:2] = sd_r ** 2
    diag[1:-1:2] = sd_theta ** 2
    diag[-1] = sd_c ** 2
    return np.diag(diag)


def initial_state(n_points, width=64.0, radius_fraction=0.4, c=5.0, phase=0.0):
    """Circle of control points at ``radius_fraction * width`` with attenuation ``c``."""
    return ShapeParams.circle(n_points, radius_fraction * width, c, phase=phase)
