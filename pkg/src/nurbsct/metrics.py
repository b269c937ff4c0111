"""Reconstruction error metrics."""
import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .errors import DegenerateError, DomainError

__all__ = ["shape_error", "attenuation_error", "convex_hull_excess"]


def _support(img):
    vals = np.asarray(getattr(img, "values", img), dtype=float)
    return vals > 0


def shape_error(truth, recon):
    """Symmetric-difference area of the two supports relative to the truth, in %.

    Only supports matter: any positive level counts as object.
    """
    t = _support(truth)
    r = _support(recon)
    if t.shape != r.shape:
        raise DomainError("images must share a grid", truth=t.shape, recon=r.shape)
    area = t.sum()
    if area == 0:
        raise DegenerateError("truth image has empty support")
    return 100.0 * (np.sum(t & ~r) + np.sum(r & ~t)) / area


def attenuation_error(c_true, c_est):
    if not c_true > 0:
        raise DomainError("true attenuation must be positive", c_true=c_true)
    return 100.0 * abs(c_est - c_true) / c_true


def convex_hull_excess(img):
    """Relative number of pixel centres filled in by taking the convex hull.

    ``(#centres inside hull(support) - #support) / #support``; a digitally
    convex support gives 0.
    """
    mask = _support(img)
    if mask.sum() == 0:
        raise DegenerateError("empty support")
    ii, jj = np.nonzero(mask)
    pts = np.column_stack([jj, -ii]).astype(float)
    try:
        hull = ConvexHull(pts)
    except QhullError:
        return 0.0  # collinear support: hull has no interior
    gi, gj = np.mgrid[ii.min():ii.max() + 1, jj.min():jj.max() + 1]
    grid = np.column_stack([gj.ravel(), -gi.ravel()]).astype(float)
    eq = hull.equations
    inside = np.all(grid @ eq[:, :2].T + eq[:, 2] <= 1e-9, axis=1)
    return (inside.sum() - mask.sum()) / mask.sum()
