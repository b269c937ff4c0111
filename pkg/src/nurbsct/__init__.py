"""NURBS-MCMC boundary recovery from sparse-view fan-beam CT.

Set ``NURBSCT_NUMBA=0`` before import to run the pure-numpy kernels.
"""
from ._accel import backend
from .errors import ConfigError, DegenerateError, DomainError, ReconError, StageError
from .nurbs import (ControlPoint, KnotVector, NurbsCurve, basis, eval_curve, rational_basis,
                    sample_polyline)
from .raster import RasterImage, ShapeParams, point_in_curve, rasterize
from .projector import FanBeamGeometry, MatrixCache, Sinogram, SystemMatrix, build_matrix
from .phantoms import (MeasurementData, Phantom, make_phantom, normalize_measured,
                       simulate_data, subsample_views)
from .prior import PriorSpec, check_hard_constraints, log_prior
from .posterior import PosteriorProblem, default_proposal_cov, initial_state
from .sampler import Chain, DramConfig, cm_estimate, dram_sample, mh_sample, top_posterior_states
from .diagnostics import effective_sample_size, geweke_z
from .tv import SweepGrid, TvProblem, optimal_sweep, threshold, tv_reconstruct, tv_value
from .metrics import attenuation_error, convex_hull_excess, shape_error

__version__ = "0.1.0"
