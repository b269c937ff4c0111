"""Convergence diagnostics and summaries for MCMC chains."""
import numpy as np
from scipy.linalg import solve_toeplitz

from .errors import DegenerateError, DomainError
from .sampler import component_names

__all__ = ["autocovariance", "spectrum0_ar", "geweke_z", "geweke_all", "effective_sample_size",
           "histograms", "traces"]


def _as_series(chain, component, burn_in):
    xs = chain.samples[:, component] if hasattr(chain, "samples") else np.asarray(chain, dtype=float)
    start = int(np.floor(burn_in * len(xs)))
    return np.asarray(xs[start:], dtype=float)


def autocovariance(x, max_lag=None):
    """Biased sample autocovariance via FFT, lags 0..max_lag."""
    x = np.asarray(x, dtype=float)
    n = x.size
    max_lag = n - 1 if max_lag is None else min(max_lag, n - 1)
    d = x - x.mean()
    size = 1 << int(np.ceil(np.log2(2 * n)))
    f = np.fft.rfft(d, size)
    acov = np.fft.irfft(f * np.conj(f), size)[:max_lag + 1] / n
    return acov


def spectrum0_ar(x, max_order=None):
    """Spectral density at frequency zero from an AR fit.

    The order is chosen by AIC among Yule-Walker fits of order
    ``0..max_order`` (default ``min(n - 1, 10 log10 n)``).  The result is
    scaled so that ``spectrum0_ar(x) / n`` estimates the variance of the mean.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 3:
        raise DegenerateError("series too short for a spectral estimate", n=n)
    acov = autocovariance(x)
    if not acov[0] > 0:
        raise DegenerateError("series has zero variance")
    if max_order is None:
        max_order = int(min(n - 1, np.floor(10 * np.log10(n))))
    best = (n * np.log(acov[0]), acov[0], np.zeros(0))
    for p in range(1, max_order + 1):
        try:
            phi = solve_toeplitz(acov[:p], acov[1:p + 1])
        except np.linalg.LinAlgError:
            break
        s2 = acov[0] - phi @ acov[1:p + 1]
        if not s2 > 0:
            break
        aic = n * np.log(s2) + 2 * p
        if aic < best[0]:
            best = (aic, s2, phi)
    _, s2, phi = best
    return s2 / (1.0 - phi.sum()) ** 2


def geweke_z(chain, component, frac_a=0.1, frac_b=0.5, burn_in=0.2):
    """Geweke z-score: early-window mean minus late-window mean over their SE.

    Works on the post-burn-in part of ``chain`` (a Chain or a 1-D array).
    """
    if not (0 < frac_a < 1 and 0 < frac_b < 1 and frac_a + frac_b <= 1):
        raise DomainError("window fractions must be positive and sum to at most 1",
                          frac_a=frac_a, frac_b=frac_b)
    x = _as_series(chain, component, burn_in)
    na = int(np.floor(frac_a * x.size))
    nb = int(np.floor(frac_b * x.size))
    if na < 3 or nb < 3:
        raise DegenerateError("chain too short for the Geweke windows", length=x.size)
    a = x[:na]
    b = x[x.size - nb:]
    if np.ptp(a) == 0 or np.ptp(b) == 0:
        raise DegenerateError("Geweke window has zero variance", component=component)
    var = spectrum0_ar(a) / na + spectrum0_ar(b) / nb
    return float((a.mean() - b.mean()) / np.sqrt(var))


def geweke_all(chain, frac_a=0.1, frac_b=0.5, burn_in=0.2):
    """z-score per component; ``nan`` where the windows are degenerate."""
    out = np.full(chain.dim, np.nan)
    for j in range(chain.dim):
        try:
            out[j] = geweke_z(chain, j, frac_a, frac_b, burn_in)
        except DegenerateError:
            pass
    return out


def effective_sample_size(x):
    """ESS with Geyer's initial monotone positive sequence estimator."""
    x = np.asarray(x, dtype=float)
    n = x.size
    acov = autocovariance(x)
    if not acov[0] > 0:
        raise DegenerateError("series has zero variance")
    rho = acov / acov[0]
    m = (n - 1) // 2
    pairs = rho[0:2 * m:2] + rho[1:2 * m + 1:2]
    if pairs.size == 0:
        return float(n)
    neg = np.nonzero(pairs <= 0)[0]
    pairs = pairs[:neg[0]] if neg.size else pairs
    pairs = np.minimum.accumulate(pairs)
    tau = -1.0 + 2.0 * pairs.sum()
    return float(n / max(tau, 1e-12))


def histograms(chain, bins=50, burn_in=0.2):
    """``{name: (counts, edges)}`` for every component after burn-in."""
    names = component_names(chain.dim, chain.shape_layout)
    out = {}
    for j, name in enumerate(names):
        x = _as_series(chain, j, burn_in)
        out[name] = np.histogram(x, bins=bins)
    return out


def traces(chain, max_points=None):
    """``{name: samples}`` for every component, optionally thinned to ``max_points``."""
    names = component_names(chain.dim, chain.shape_layout)
    step = 1 if max_points is None else max(1, int(np.ceil(len(chain) / max_points)))
    return {name: chain.samples[::step, j].copy() for j, name in enumerate(names)}
