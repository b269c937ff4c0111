"""Random-walk Metropolis and DRAM (delayed rejection + adaptive Metropolis).

Both samplers take any log-target: a :class:`~nurbsct.posterior.PosteriorProblem`
or a plain callable returning a float (``-inf`` outside the support).

Random numbers are drawn in fixed-size blocks, one ``(stages, block, d)``
array of standard normals followed by one ``(stages, block)`` array of
uniforms, whether or not a later stage is needed.  This makes the stream
consumption independent of the accept/reject history, so DRAM with a single
stage and no adaptation reproduces :func:`mh_sample` exactly, and a chain
resumed from a block checkpoint continues bit-identically.
"""
from dataclasses import dataclass, field
import json
import logging
import math
import os

import numpy as np

from .errors import DegenerateError, DomainError
from .prior import wrap_angle
from .raster import ShapeParams

__all__ = ["DramConfig", "Chain", "mh_sample", "dram_sample", "cm_estimate",
           "top_posterior_states", "write_chain_csv", "read_chain_csv", "component_names"]

log = logging.getLogger(__name__)


@dataclass
class DramConfig:
    """Sampler settings.

    ``ridge`` regularizes the adapted covariance by ``ridge * diag(C0)`` where
    ``C0`` is the initial proposal covariance.  ``adapt_memory`` is the
    fraction of the chain history the adapted covariance is estimated from
    (1.0 = the full past chain).  ``gibbs_c`` follows every DRAM step with an
    exact conditional draw of the last component through the target's
    ``gibbs_attenuation(vec, u, temperature)``; the composition keeps the
    target invariant.  ``anneal_fraction > 0`` tempers the likelihood by
    ``anneal_start ** (1 - t / T)`` for the first ``T = anneal_fraction *
    n_iter`` iterations; it must not exceed ``burn_in`` so that every
    retained sample targets the untempered posterior.  Stored log-posteriors
    are always untempered.
    """

    n_iter: int
    n0: int = 100
    adapt_interval: int = 100
    dr_stages: int = 2
    dr_scale: float = 0.2
    init: object = None
    seed: int = 0
    burn_in: float = 0.2
    adapt: bool = True
    proposal_cov: object = None
    ridge: float = 1e-6
    adapt_memory: float = 1.0
    adapt_scale: float = None
    block: int = 1000
    gibbs_c: bool = False
    anneal_fraction: float = 0.0
    anneal_start: float = 1e-3

    def __post_init__(self):
        if self.n_iter < 1:
            raise DomainError("n_iter must be >= 1", n_iter=self.n_iter)
        if self.n0 < 1:
            raise DomainError("non-adaptation period n0 must be >= 1", n0=self.n0)
        if self.adapt_interval < 1:
            raise DomainError("adapt_interval must be >= 1")
        if self.dr_stages < 1:
            raise DomainError("dr_stages must be >= 1", dr_stages=self.dr_stages)
        if not 0 < self.dr_scale <= 1:
            raise DomainError("dr_scale must lie in (0, 1]", dr_scale=self.dr_scale)
        if not 0 <= self.burn_in < 1:
            raise DomainError("burn_in must lie in [0, 1)", burn_in=self.burn_in)
        if not 0 < self.adapt_memory <= 1:
            raise DomainError("adapt_memory must lie in (0, 1]")
        if self.block < 1:
            raise DomainError("block must be >= 1")
        if not 0 <= self.anneal_fraction <= self.burn_in:
            raise DomainError("anneal_fraction must lie in [0, burn_in]",
                              anneal_fraction=self.anneal_fraction, burn_in=self.burn_in)
        if not 0 < self.anneal_start <= 1:
            raise DomainError("anneal_start must lie in (0, 1]", anneal_start=self.anneal_start)


@dataclass
class Chain:
    samples: np.ndarray
    log_posts: np.ndarray
    accepted_stage: np.ndarray
    seed: int
    angle_components: tuple = ()
    n_evals: int = 0
    shape_layout: bool = False
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (len(self.samples) == len(self.log_posts) == len(self.accepted_stage)):
            raise DomainError("chain arrays must have equal length")

    def __len__(self):
        return len(self.log_posts)

    @property
    def dim(self):
        return self.samples.shape[1]

    @property
    def acceptance_rate(self):
        return float(np.mean(self.accepted_stage > 0)) if len(self) else 0.0

    def stage_counts(self):
        return np.bincount(self.accepted_stage, minlength=2)

    def post_burn_in(self, burn_in):
        start = int(math.floor(burn_in * len(self)))
        return self.samples[start:], self.log_posts[start:]


def component_names(dim, shape_layout=True):
    if not shape_layout:
        return [f"x{i}" for i in range(dim)]
    names = []
    for i in range((dim - 1) // 2):
        names += [f"r{i}", f"theta{i}"]
    return names + ["c"]


def _resolve_target(target):
    f = getattr(target, "log_posterior", None)
    if f is None:
        if not callable(target):
            raise DomainError("target must be callable or expose log_posterior")
        f = target
    angles = tuple(getattr(target, "angle_components", ()))
    shape = hasattr(target, "prior")
    return f, angles, shape


def _init_vector(cfg, target):
    init = cfg.init
    if init is None:
        raise DomainError("sampler needs an initial state")
    return (init.vector if isinstance(init, ShapeParams) else np.array(init, dtype=float)).ravel()


def _proposal_cov(cfg, d):
    if cfg.proposal_cov is None:
        return np.eye(d)
    C = np.asarray(cfg.proposal_cov, dtype=float)
    if C.ndim == 1:
        C = np.diag(C)
    if C.shape != (d, d):
        raise DomainError("proposal covariance has wrong shape", shape=C.shape, dim=d)
    return C


class _Stats:
    """Chunked mean/scatter summaries of the chain for covariance adaptation."""

    def __init__(self, d):
        self.counts = []
        self.means = []
        self.scatters = []
        self.upto = 0
        self.d = d

    def add(self, x):
        if len(x) == 0:
            return
        mu = x.mean(axis=0)
        dx = x - mu
        self.counts.append(len(x))
        self.means.append(mu)
        self.scatters.append(dx.T @ dx)
        self.upto += len(x)

    def covariance(self, memory):
        target = memory * self.upto
        n = 0
        k = len(self.counts)
        while k > 0 and n < target:
            k -= 1
            n += self.counts[k]
        cnt = np.array(self.counts[k:], dtype=float)
        mus = np.array(self.means[k:])
        mu = cnt @ mus / n
        dm = mus - mu
        M2 = np.sum(self.scatters[k:], axis=0) + (dm * cnt[:, None]).T @ dm
        return M2 / max(n - 1, 1)

    def to_json(self):
        return {"counts": self.counts, "means": [m.tolist() for m in self.means],
                "scatters": [s.tolist() for s in self.scatters], "upto": self.upto}

    @classmethod
    def from_json(cls, d, blob):
        s = cls(d)
        s.counts = list(blob["counts"])
        s.means = [np.array(m) for m in blob["means"]]
        s.scatters = [np.array(m) for m in blob["scatters"]]
        s.upto = blob["upto"]
        return s


def _chol(C):
    L = np.linalg.cholesky(C)
    return L, np.linalg.inv(L)


def _accept(lpy, lp, u):
    if lpy == -np.inf:
        return False
    return lpy >= lp or u < math.exp(lpy - lp)


def mh_sample(target, cfg):
    """Plain random-walk Metropolis with Gaussian steps ``N(0, proposal_cov)``.

    Only ``n_iter``, ``init``, ``seed``, ``proposal_cov`` and ``block`` of
    ``cfg`` are used.
    """
    f, angles, shape = _resolve_target(target)
    x = _init_vector(cfg, target)
    d = x.size
    lp = f(x)
    if not np.isfinite(lp):
        raise DomainError("initial state has zero posterior density", log_post=lp)
    L, _ = _chol(_proposal_cov(cfg, d))
    rng = np.random.default_rng(cfg.seed)
    n = cfg.n_iter
    samples = np.empty((n, d))
    lps = np.empty(n)
    stage = np.zeros(n, dtype=np.int64)
    t = 0
    evals = 0
    while t < n:
        Z = rng.standard_normal((1, cfg.block, d))
        U = rng.random((1, cfg.block))
        for k in range(min(cfg.block, n - t)):
            y = x + L @ Z[0, k]
            lpy = f(y)
            evals += 1
            if _accept(lpy, lp, U[0, k]):
                x, lp = y, lpy
                stage[t] = 1
            samples[t] = x
            lps[t] = lp
            t += 1
    return Chain(samples, lps, stage, cfg.seed, angles, evals, shape)


class _DelayedRejection:
    """Log acceptance probabilities for the ``k``-stage DR path.

    ``pts[0]`` is the current state and ``pts[j]`` the stage-``j`` proposal,
    drawn from ``N(pts[0], gam[j-1]^2 C)``; ``Linv`` whitens ``C``.
    """

    def __init__(self, Linv, gammas):
        self.Linv = Linv
        self.gam = gammas

    def __call__(self, pts, lps):
        self.pts = pts
        self.lps = lps
        self.memo = {}
        return self._log_alpha(tuple(range(len(pts))))

    def _logq(self, j, a, b):
        w = self.Linv @ (self.pts[b] - self.pts[a])
        return -0.5 * float(w @ w) / self.gam[j - 1] ** 2

    def _log_alpha(self, seq):
        if seq in self.memo:
            return self.memo[seq]
        lps = self.lps
        k = len(seq) - 1
        first, last = seq[0], seq[-1]
        if lps[last] == -np.inf:
            out = -np.inf
        else:
            num = lps[last] - lps[first]
            for j in range(1, k):
                num += self._logq(j, last, seq[k - j]) - self._logq(j, first, seq[j])
                a_rev = self._log_alpha(tuple(seq[k - i] for i in range(j + 1)))
                a_fwd = self._log_alpha(seq[:j + 1])
                if a_fwd >= 0.0:
                    # the forward stage could not have been rejected
                    num = -np.inf
                    break
                num += _log1mexp(a_rev) - _log1mexp(a_fwd)
            out = min(0.0, num)
        self.memo[seq] = out
        return out


def _log1mexp(a):
    """``log(1 - exp(a))`` for ``a <= 0``."""
    if a == -np.inf:
        return 0.0
    if a >= 0.0:
        return -np.inf
    return math.log(-math.expm1(a)) if a > -0.693 else math.log1p(-math.exp(a))


def _state_path(chain_path):
    return str(chain_path) + ".state.json"


def dram_sample(target, cfg, chain_path=None, resume=False, progress=None):
    """Delayed-rejection adaptive Metropolis.

    Parameters
    ----------
    target : PosteriorProblem or callable
    cfg : DramConfig
    chain_path : path, optional
        Append-only CSV of the chain; a JSON sidecar holding the sampler state
        is rewritten after every completed block.
    resume : bool
        Continue from the sidecar state of ``chain_path`` if present.
    progress : callable, optional
        ``progress(t, chain_so_far_acceptance)`` after every block.

    Returns
    -------
    Chain
    """
    f, angles, shape = _resolve_target(target)
    parts = getattr(target, "log_posterior_parts", None)
    if parts is None:
        if cfg.anneal_fraction > 0:
            raise DomainError("annealing needs a target with log_posterior_parts")
        parts = _untempered(f)
    d = _init_vector(cfg, target).size
    C0 = _proposal_cov(cfg, d)
    ridge = cfg.ridge * np.diag(np.diag(C0))
    sd = cfg.adapt_scale if cfg.adapt_scale is not None else 2.4 ** 2 / d
    gammas = [cfg.dr_scale ** s for s in range(cfg.dr_stages)]
    S = cfg.dr_stages
    B = cfg.block
    n = cfg.n_iter
    t_anneal = int(cfg.anneal_fraction * n)

    def temperature(it):
        if it >= t_anneal:
            return 1.0
        return cfg.anneal_start ** (1.0 - it / t_anneal)

    samples = np.empty((n, d))
    lps = np.empty(n)
    stage = np.zeros(n, dtype=np.int64)
    state_file = _state_path(chain_path) if chain_path is not None else None

    if resume and state_file is not None and os.path.exists(state_file):
        with open(state_file) as fh:
            st = json.load(fh)
        t = int(st["t"])
        if t > n:
            raise DomainError("stored chain is longer than n_iter", stored=t, n_iter=n)
        prev = read_chain_csv(chain_path, limit=t)
        samples[:t] = prev.samples
        lps[:t] = prev.log_posts
        stage[:t] = prev.accepted_stage
        _truncate_chain_csv(chain_path, t)
        x = np.array(st["x"])
        xp = tuple(st["parts"])
        C = np.array(st["C"])
        stats = _Stats.from_json(d, st["stats"])
        evals = int(st["evals"])
        rng = np.random.default_rng()
        rng.bit_generator.state = st["rng"]
        log.info("resumed chain at iteration %d", t)
    else:
        x = _init_vector(cfg, target)
        xp = parts(x)
        evals = 1
        if not np.isfinite(xp[0] + xp[1]):
            raise DomainError("initial state has zero posterior density", log_post=xp[0] + xp[1])
        C = C0.copy()
        stats = _Stats(d)
        t = 0
        rng = np.random.default_rng(cfg.seed)
        if chain_path is not None:
            _start_chain_csv(chain_path, d, shape)
    L, Linv = _chol(C)
    dr = _DelayedRejection(Linv, gammas)
    gibbs = getattr(target, "gibbs_attenuation", None)
    if cfg.gibbs_c and gibbs is None:
        raise DomainError("gibbs_c needs a target with gibbs_attenuation")

    while t < n:
        block_start = t
        Z = rng.standard_normal((S, B, d))
        U = rng.random((S, B))
        G = rng.random(B) if cfg.gibbs_c else None
        for k in range(min(B, n - t)):
            lam = temperature(t)
            lp = xp[0] + lam * xp[1]
            y = x + L @ Z[0, k]
            yp = parts(y)
            lpy = yp[0] + lam * yp[1]
            evals += 1
            if _accept(lpy, lp, U[0, k]):
                x, xp = y, yp
                stage[t] = 1
            elif S > 1:
                pts = [x, y]
                vals = [lp, lpy]
                for s in range(1, S):
                    ys = x + gammas[s] * (L @ Z[s, k])
                    sp = parts(ys)
                    evals += 1
                    pts.append(ys)
                    vals.append(sp[0] + lam * sp[1])
                    la = dr(pts, vals)
                    if la > -np.inf and (la >= 0.0 or U[s, k] < math.exp(la)):
                        x, xp = ys, sp
                        stage[t] = s + 1
                        break
            if G is not None:
                x, xp = gibbs(x, G[k], lam)
                evals += 1
            samples[t] = x
            lps[t] = xp[0] + xp[1]
            t += 1
            if cfg.adapt and t >= cfg.n0 and (t - cfg.n0) % cfg.adapt_interval == 0:
                stats.add(samples[stats.upto:t])
                C_new = sd * (stats.covariance(cfg.adapt_memory) + ridge)
                try:
                    L, Linv = _chol(C_new)
                    C = C_new
                    dr.Linv = Linv
                except np.linalg.LinAlgError:
                    log.debug("adapted covariance not positive definite at %d; kept previous", t)
        if chain_path is not None:
            _append_chain_csv(chain_path, block_start, samples[block_start:t], lps[block_start:t],
                              stage[block_start:t])
            if t - block_start == B:
                _save_state(state_file, t, x, xp, C, stats, evals, rng)
        if progress is not None:
            progress(t, float(np.mean(stage[:t] > 0)))

    chain = Chain(samples, lps, stage, cfg.seed, angles, evals, shape)
    chain.meta["final_cov"] = C
    return chain


def _untempered(f):
    def parts(v):
        return f(v), 0.0
    return parts


def _save_state(path, t, x, xp, C, stats, evals, rng):
    blob = {"t": t, "x": x.tolist(), "parts": [float(xp[0]), float(xp[1])], "C": C.tolist(), "stats": stats.to_json(),
            "evals": evals, "rng": rng.bit_generator.state}
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        json.dump(blob, fh)
    os.replace(tmp, path)


def _start_chain_csv(path, d, shape_layout):
    with open(path, "w") as fh:
        fh.write(",".join(["iteration"] + component_names(d, shape_layout)
                          + ["log_post", "accepted_stage"]) + "\n")


def _append_chain_csv(path, start, samples, lps, stage):
    with open(path, "a") as fh:
        for i in range(len(lps)):
            row = [str(start + i + 1)] + [repr(float(v)) for v in samples[i]]
            fh.write(",".join(row + [repr(float(lps[i])), str(int(stage[i]))]) + "\n")


def _truncate_chain_csv(path, t):
    with open(path) as fh:
        lines = fh.readlines()
    with open(path, "w") as fh:
        fh.writelines(lines[:t + 1])


def write_chain_csv(chain, path):
    _start_chain_csv(path, chain.dim, chain.shape_layout)
    _append_chain_csv(path, 0, chain.samples, chain.log_posts, chain.accepted_stage)


def read_chain_csv(path, limit=None, seed=0):
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        rows = []
        for line in fh:
            if limit is not None and len(rows) >= limit:
                break
            if line.strip():
                rows.append(line)
    names = header[1:-2]
    d = len(names)
    arr = np.array([[float(v) for v in r.split(",")] for r in rows]).reshape(-1, d + 3)
    shape_layout = bool(names) and names[-1] == "c"
    angles = tuple(i for i, nm in enumerate(names) if nm.startswith("theta"))
    return Chain(arr[:, 1:1 + d], arr[:, 1 + d], arr[:, 2 + d].astype(np.int64), seed,
                 angles, 0, shape_layout)


def cm_estimate(chain, burn_in=0.2, circular=True):
    """Conditional-mean estimate: component-wise mean after burn-in.

    Angle components are averaged on the circle (argument of the mean unit
    phasor, placed on the branch nearest the raw mean) unless
    ``circular=False``.
    """
    xs, _ = chain.post_burn_in(burn_in)
    if len(xs) == 0:
        raise DegenerateError("no samples left after burn-in removal")
    m = xs.mean(axis=0)
    if circular:
        for j in chain.angle_components:
            circ = np.angle(np.mean(np.exp(1j * xs[:, j])))
            m[j] = m[j] + float(wrap_angle(circ - m[j]))
    return ShapeParams.from_vector(m) if chain.shape_layout else m


def top_posterior_states(chain, k):
    """The ``k`` stored states with the highest log-posterior, best first."""
    if k < 1:
        raise DomainError("k must be >= 1", k=k)
    if k > len(chain):
        raise DomainError("k exceeds chain length", k=k, length=len(chain))
    order = np.argsort(-chain.log_posts, kind="stable")[:k]
    if chain.shape_layout:
        return [ShapeParams.from_vector(chain.samples[i]) for i in order]
    return [chain.samples[i].copy() for i in order]
