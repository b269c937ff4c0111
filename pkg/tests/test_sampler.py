import os

import numpy as np
import pytest

from nurbsct.diagnostics import effective_sample_size, spectrum0_ar
from nurbsct.errors import DegenerateError, DomainError
from nurbsct.posterior import PosteriorProblem, default_proposal_cov, initial_state
from nurbsct.prior import PriorSpec
from nurbsct.raster import ShapeParams
from nurbsct.sampler import (Chain, DramConfig, cm_estimate, component_names, dram_sample,
                             mh_sample, read_chain_csv, top_posterior_states, write_chain_csv)

from stubs import (FIVE_WEIGHTS, GAUSS_COV, GAUSS_MEAN, banana, five_state, gaussian2d,
                   tv_distance)


def test_config_validation():
    with pytest.raises(DomainError):
        DramConfig(n_iter=10, n0=0)
    with pytest.raises(DomainError):
        DramConfig(n_iter=10, dr_stages=0)
    with pytest.raises(DomainError):
        DramConfig(n_iter=10, burn_in=1.0)
    with pytest.raises(DomainError):
        DramConfig(n_iter=10, anneal_fraction=0.5, burn_in=0.2)
    with pytest.raises(DomainError):
        DramConfig(n_iter=0)


def test_mh_gaussian_mean():
    ch = mh_sample(gaussian2d, DramConfig(n_iter=100_000, init=[0.0, 0.0], seed=3,
                                          proposal_cov=1.5 * GAUSS_COV))
    xs = ch.samples[1000:]
    for j in range(2):
        se = np.sqrt(spectrum0_ar(xs[:, j]) / len(xs))
        assert abs(xs[:, j].mean() - GAUSS_MEAN[j]) < 3 * se


def test_dram_gaussian_mean_and_acceptance():
    ch = dram_sample(gaussian2d, DramConfig(n_iter=100_000, init=[0.0, 0.0], seed=4,
                                            proposal_cov=np.eye(2) * 25))
    xs = ch.samples[20_000:]
    for j in range(2):
        se = np.sqrt(spectrum0_ar(xs[:, j]) / len(xs))
        assert abs(xs[:, j].mean() - GAUSS_MEAN[j]) < 3 * se
    assert np.allclose(np.cov(xs.T), GAUSS_COV, rtol=0.1, atol=0.05)
    # the adapted first-stage proposal; later stages only add to the total
    first = np.mean(ch.accepted_stage[20_000:] == 1)
    assert 0.1 <= first <= 0.6
    assert np.mean(ch.accepted_stage[20_000:] > 0) > first


def test_five_state_distribution():
    ch = mh_sample(five_state, DramConfig(n_iter=1_000_000, init=[2.5], seed=5,
                                          proposal_cov=[[1.5]], block=10_000))
    counts = np.bincount(np.floor(ch.samples[:, 0]).astype(int), minlength=5)
    assert tv_distance(counts, FIVE_WEIGHTS) < 0.02


def test_dram_reduces_to_mh():
    kw = dict(n_iter=5000, init=[0.0, 0.0], seed=11, proposal_cov=GAUSS_COV, block=700)
    a = mh_sample(gaussian2d, DramConfig(**kw))
    b = dram_sample(gaussian2d, DramConfig(dr_stages=1, adapt=False, **kw))
    assert np.array_equal(a.samples, b.samples)
    assert np.array_equal(a.log_posts, b.log_posts)
    assert np.array_equal(a.accepted_stage, b.accepted_stage)


def test_same_seed_same_chain():
    cfg = DramConfig(n_iter=3000, init=[0.0, 0.0], seed=2)
    a = dram_sample(gaussian2d, cfg)
    b = dram_sample(gaussian2d, cfg)
    assert np.array_equal(a.samples, b.samples)
    c = dram_sample(gaussian2d, DramConfig(n_iter=3000, init=[0.0, 0.0], seed=3))
    assert not np.array_equal(a.samples, c.samples)


def test_tiny_steps_always_accepted():
    ch = mh_sample(gaussian2d, DramConfig(n_iter=2000, init=[1.0, -2.0], seed=0,
                                          proposal_cov=np.eye(2) * 1e-14))
    assert ch.acceptance_rate > 0.999


def test_delayed_rejection_preserves_target():
    ch = dram_sample(gaussian2d, DramConfig(n_iter=60_000, init=[0.0, 0.0], seed=8,
                                            proposal_cov=np.eye(2) * 100, dr_stages=3,
                                            dr_scale=0.1, adapt=False))
    xs = ch.samples[2000:]
    assert set(np.unique(ch.accepted_stage)) <= {0, 1, 2, 3}
    assert ch.stage_counts()[2] > 0 and ch.stage_counts()[3] > 0
    assert np.allclose(np.cov(xs.T), GAUSS_COV, rtol=0.12, atol=0.08)
    for j in range(2):
        se = np.sqrt(spectrum0_ar(xs[:, j]) / len(xs))
        assert abs(xs[:, j].mean() - GAUSS_MEAN[j]) < 3 * se


def test_banana_dram_ess_beats_mh():
    kw = dict(n_iter=40_000, init=[0.0, -3.0], seed=9, proposal_cov=np.eye(2))
    mh = mh_sample(banana, DramConfig(**kw))
    dr = dram_sample(banana, DramConfig(**kw))
    ess_mh = min(effective_sample_size(mh.samples[8000:, j]) for j in range(2))
    ess_dr = min(effective_sample_size(dr.samples[8000:, j]) for j in range(2))
    assert ess_dr >= ess_mh


def test_infeasible_init_rejected():
    with pytest.raises(DomainError):
        mh_sample(five_state, DramConfig(n_iter=10, init=[7.0]))
    with pytest.raises(DomainError):
        dram_sample(five_state, DramConfig(n_iter=10, init=[-1.0]))
    with pytest.raises(DomainError):
        dram_sample(five_state, DramConfig(n_iter=10))


def test_chain_never_stores_infeasible_state():
    ch = dram_sample(five_state, DramConfig(n_iter=20_000, init=[2.5], seed=1,
                                            proposal_cov=[[4.0]]))
    assert np.all(np.isfinite(ch.log_posts))
    assert np.all((ch.samples >= 0) & (ch.samples < 5))


def _run_to(path, n, resume):
    cfg = DramConfig(n_iter=n, init=[0.0, 0.0], seed=21, block=500, n0=50, adapt_interval=37)
    return dram_sample(gaussian2d, cfg, chain_path=str(path), resume=resume)


def test_resume_is_bit_identical(tmp_path):
    full = _run_to(tmp_path / "full.csv", 3000, False)
    part = tmp_path / "part.csv"
    _run_to(part, 1700, False)  # state sidecar at 1500, csv holds 1700 rows
    assert os.path.exists(str(part) + ".state.json")
    resumed = _run_to(part, 3000, True)
    assert np.array_equal(full.samples, resumed.samples)
    assert np.array_equal(full.accepted_stage, resumed.accepted_stage)
    assert (tmp_path / "full.csv").read_text() == part.read_text()


def test_resume_without_state_starts_fresh(tmp_path):
    a = _run_to(tmp_path / "a.csv", 800, True)
    b = _run_to(tmp_path / "b.csv", 800, False)
    assert np.array_equal(a.samples, b.samples)


def test_chain_csv_roundtrip(tmp_path):
    ch = dram_sample(gaussian2d, DramConfig(n_iter=300, init=[0.0, 0.0], seed=1))
    write_chain_csv(ch, tmp_path / "c.csv")
    back = read_chain_csv(tmp_path / "c.csv")
    assert np.array_equal(back.samples, ch.samples)
    assert np.array_equal(back.log_posts, ch.log_posts)
    assert np.array_equal(back.accepted_stage, ch.accepted_stage)


def test_cm_estimate_circular():
    th = np.concatenate([np.full(50, np.pi - 0.1), np.full(50, -np.pi + 0.1)])
    xs = np.column_stack([np.full(100, 2.0), th, np.full(100, 0.5)])
    ch = Chain(xs, np.zeros(100), np.ones(100, dtype=np.int64), 0, (1,), shape_layout=True)
    cm = cm_estimate(ch, burn_in=0.0)
    assert isinstance(cm, ShapeParams)
    assert abs(abs(cm.angles[0]) - np.pi) < 1e-12
    raw = cm_estimate(ch, burn_in=0.0, circular=False)
    assert abs(raw.angles[0]) < 1e-12
    with pytest.raises(DegenerateError):
        cm_estimate(Chain(xs[:0], np.zeros(0), np.zeros(0, dtype=np.int64), 0), burn_in=0.5)


def test_cm_of_constant_chain_and_mean():
    xs = np.random.default_rng(0).normal(size=(1000, 3))
    ch = Chain(xs, np.zeros(1000), np.ones(1000, dtype=np.int64), 0)
    assert np.allclose(cm_estimate(ch, 0.2), xs[200:].mean(axis=0))


def test_top_states():
    xs = np.arange(10.0)[:, None]
    lp = np.array([0, 5, 3, 5, 1, 9, 2, 0, 0, 4.0])
    ch = Chain(xs, lp, np.ones(10, dtype=np.int64), 0)
    top = top_posterior_states(ch, 3)
    assert [float(t[0]) for t in top] == [5.0, 1.0, 3.0]
    with pytest.raises(DomainError):
        top_posterior_states(ch, 11)


def test_component_names():
    assert component_names(5) == ["r0", "theta0", "r1", "theta1", "c"]
    assert component_names(2, False) == ["x0", "x1"]


@pytest.fixture(scope="module")
def small_problem(omega1_data, cache):
    return PosteriorProblem(omega1_data, 64, PriorSpec.default(6), cache=cache)


def test_shape_chain_gibbs_and_anneal(small_problem):
    cfg = DramConfig(n_iter=3000, init=initial_state(6), proposal_cov=default_proposal_cov(6),
                     seed=1, gibbs_c=True, anneal_fraction=0.2, anneal_start=1e-3)
    ch = dram_sample(small_problem, cfg)
    assert ch.shape_layout and ch.dim == 13
    assert np.all(ch.samples[:, -1] >= 0)
    # stored log-posteriors are untempered, also inside the annealing phase
    for i in (10, 300, 599, 2999):
        assert ch.log_posts[i] == pytest.approx(small_problem(ch.samples[i]), rel=1e-10)
    # the Gibbs step pulls c off its initial value at once
    assert ch.samples[0, -1] < 1.0
