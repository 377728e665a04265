import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from baytomo.mcmc import (CauchyProductTarget, ChainAccumulator, GaussianTarget, MwgConfig, NutsConfig,
                          accumulate, batch_means_se, finalize, leapfrog, likelihood_delta, mwg_run, nuts_run)
from baytomo.mcmc.mwg import commit_residual
from baytomo.priors import PRIOR_NAMES
from conftest import small_problem


# ---------------------------------------------------------------- leapfrog

def test_leapfrog_single_step():
    x, p, div = leapfrog(lambda x: x, np.array([1.0]), np.array([0.0]), 0.1)
    assert x[0] == pytest.approx(0.995, abs=1e-15)
    assert p[0] == pytest.approx(-0.09975, abs=1e-15)
    assert not div


def test_leapfrog_reversible_and_energy_drift():
    x0, p0 = np.array([1.0]), np.array([0.3])
    x, p, _ = leapfrog(lambda x: x, x0, p0, 0.01, L_steps=1000)
    H = lambda x, p: 0.5 * float(x @ x + p @ p)
    assert abs(H(x, p) - H(x0, p0)) < 1e-4
    xb, pb, _ = leapfrog(lambda x: x, x, -p, 0.01, L_steps=1000)
    assert np.allclose(xb, x0, atol=1e-10) and np.allclose(-pb, p0, atol=1e-10)


def test_leapfrog_mass_and_divergence():
    x, p, _ = leapfrog(lambda x: x, np.array([1.0]), np.array([0.0]), 0.1, M=np.array([2.0]))
    assert x[0] == pytest.approx(1 - 0.5 * 0.01 / 2)
    _, _, div = leapfrog(lambda x: np.full_like(x, np.nan), np.ones(2), np.ones(2), 0.1)
    assert div
    with pytest.raises(ValueError):
        leapfrog(lambda x: x, np.ones(1), np.ones(1), 0.0)


@pytest.mark.parametrize("name", PRIOR_NAMES)
def test_leapfrog_reversible_on_smoothed_posteriors(name):
    kw = {"gaussian": {"sigma_pr": 1.0}, "tv": {"alpha": 1.0, "smoothing_beta": 0.05},
          "tv_iso": {"alpha": 1.0, "smoothing_beta": 0.05}, "besov": {"scale": 1.0, "smoothing_beta": 0.05},
          "cauchy": {"lam": 1.0}, "cauchy_sheet": {"lam": 1.0}}[name]
    truth, A, sino, post = small_problem(8, 5, name, **kw)
    rng = np.random.default_rng(1)
    x0, p0 = truth.values + 0.01 * rng.standard_normal(64), rng.standard_normal(64)
    x, p, _ = leapfrog(post.gradient, x0, p0, 1e-4, L_steps=20)
    xb, pb, _ = leapfrog(post.gradient, x, -p, 1e-4, L_steps=20)
    assert np.max(np.abs(xb - x0)) < 1e-10
    assert np.max(np.abs(pb + p0)) < 1e-10 * max(1.0, np.max(np.abs(p0)))


# ---------------------------------------------------------------- accumulator

def test_accumulator_small_cases():
    acc = ChainAccumulator(1)
    for v in (1.0, 1.0, 1.0):
        accumulate(acc, [v])
    mean, var, _ = finalize(acc)
    assert mean[0] == 1.0 and var[0] == 0.0
    acc = ChainAccumulator(1).add([0.0]).add([2.0])
    mean, var, logvar = acc.finalize()
    assert mean[0] == 1.0 and var[0] == 2.0 and logvar[0] == pytest.approx(np.log10(2))
    with pytest.raises(ValueError):
        ChainAccumulator(1).add([1.0]).finalize()
    with pytest.raises(ValueError):
        ChainAccumulator(2).add([1.0])


def test_accumulator_seeded_normal():
    draws = np.random.default_rng(7).normal(3.0, 2.0, 100_000)
    acc = ChainAccumulator(1)
    for v in draws:
        acc.add(v)
    mean, var, _ = acc.finalize()
    assert abs(mean[0] - 3) < 3 * 2 / np.sqrt(1e5)
    assert var[0] == pytest.approx(4.0, rel=0.05)


def test_streaming_equals_two_pass_and_merge():
    X = np.random.default_rng(2).standard_normal((10_000, 5)) * 3 + 1
    acc = ChainAccumulator(5)
    for row in X:
        acc.add(row)
    assert np.allclose(acc.mean, X.mean(axis=0), atol=1e-10)
    assert np.allclose(acc.variance, X.var(axis=0, ddof=1), atol=1e-10)
    a, b = ChainAccumulator(5), ChainAccumulator(5)
    for row in X[:3000]:
        a.add(row)
    for row in X[3000:]:
        b.add(row)
    ab, ba = a.merge(b), b.merge(a)
    assert np.allclose(ab.mean, acc.mean, atol=1e-10) and np.allclose(ab.variance, acc.variance, atol=1e-10)
    assert np.allclose(ab.mean, ba.mean, atol=1e-12) and np.allclose(ab.variance, ba.variance, atol=1e-12)


def test_batch_means_iid():
    X = np.random.default_rng(3).standard_normal((20_000, 3))
    se = batch_means_se(X)
    assert np.all(np.abs(se - 1 / np.sqrt(20_000)) < 0.5 / np.sqrt(20_000))


# ---------------------------------------------------------------- likelihood delta

def test_likelihood_delta():
    truth, A, sino, post = small_problem(6, 5, "gaussian")
    rng = np.random.default_rng(4)
    x = rng.standard_normal(36)
    r = post.residual(x)
    assert likelihood_delta(A, sino, x, 3, x[3], r) == 0.0
    lik = lambda v: 0.5 * float(post.residual(v) @ post.residual(v)) / sino.noise_sigma**2
    for _ in range(200):
        k, new = int(rng.integers(36)), rng.standard_normal()
        y = x.copy()
        y[k] = new
        assert likelihood_delta(A, sino, x, k, new, r) == pytest.approx(lik(y) - lik(x), abs=1e-9)
    for _ in range(10_000):
        k, new = int(rng.integers(36)), rng.standard_normal()
        commit_residual(A, r, k, new - x[k])
        x[k] = new
    assert np.max(np.abs(r - post.residual(x))) < 1e-8


# ---------------------------------------------------------------- MwG

def test_mwg_standard_normal_product():
    acc, diag = mwg_run(GaussianTarget.standard(64), np.zeros(64), 2000, 8000, seed=0, cfg=MwgConfig(keep_every=1))
    assert np.all((diag.acceptance >= 0.3) & (diag.acceptance <= 0.6))
    se = batch_means_se(acc.samples)
    assert np.all(np.abs(acc.mean) < 3 * se + 1e-12) or np.mean(np.abs(acc.mean) < 3 * se) > 0.97


def test_mwg_correlated_pair():
    cov = np.array([[1.0, 0.8], [0.8, 1.0]])
    acc, _ = mwg_run(GaussianTarget(np.zeros(2), cov), np.zeros(2), 2000, 100_000, seed=5,
                     cfg=MwgConfig(keep_every=1))
    se = batch_means_se(acc.samples)
    assert np.all(np.abs(acc.mean) < 3 * se)
    assert np.allclose(acc.variance, 1.0, rtol=0.1)


def test_mwg_three_dim_gaussian_covariance():
    cov = np.array([[2.0, 0.5, 0.0], [0.5, 1.0, -0.3], [0.0, -0.3, 0.5]])
    mean = np.array([1.0, -2.0, 0.5])
    acc, _ = mwg_run(GaussianTarget(mean, cov), np.zeros(3), 1000, 100_000, seed=6, cfg=MwgConfig(keep_every=1))
    S = acc.samples
    se = batch_means_se(S)
    assert np.all(np.abs(acc.mean - mean) < 3 * se)
    assert np.allclose(np.cov(S.T), cov, atol=0.06)


def test_mwg_reproducible_and_rejects_zero_samples():
    t = GaussianTarget.standard(4)
    cfg = MwgConfig(initial_std=1.0)
    a1, _ = mwg_run(t, np.zeros(4), 0, 500, seed=9, cfg=cfg)
    a2, _ = mwg_run(t, np.zeros(4), 0, 500, seed=9, cfg=cfg)
    assert a1.mean.tobytes() == a2.mean.tobytes() and a1.m2.tobytes() == a2.m2.tobytes()
    with pytest.raises(ValueError):
        mwg_run(t, np.zeros(4), 10, 0, seed=0)


class _EnergyOnly:
    """Exposes a tomography posterior through the generic single-site interface."""

    def __init__(self, post):
        self.post = post

    def energy(self, x):
        return self.post.energy(x)

    def delta(self, x, k, new):
        y = x.copy()
        y[k] = new
        return self.post.energy(y) - self.post.energy(x)


@pytest.mark.parametrize("name", ["gaussian", "tv", "besov", "cauchy"])
@pytest.mark.parametrize("random_order", [False, True])
def test_fast_sweep_matches_generic_path(name, random_order):
    truth, A, sino, post = small_problem(4, 4, name)
    cfg = MwgConfig(initial_std=0.05, floor=1e-6, random_order=random_order)
    fast, dfast = mwg_run(post, truth.values, 30, 60, seed=11, cfg=cfg)
    slow, dslow = mwg_run(_EnergyOnly(post), truth.values, 30, 60, seed=11, cfg=cfg)
    assert np.array_equal(dfast.acceptance, dslow.acceptance)
    assert np.allclose(fast.mean, slow.mean, atol=1e-10)


def test_mwg_detailed_balance_flow():
    # three-bin coarse-graining of a frozen-kernel chain on N(0, 1)
    acc, _ = mwg_run(GaussianTarget.standard(1), np.zeros(1), 0, 200_000, seed=13,
                     cfg=MwgConfig(initial_std=1.5, keep_every=1))
    b = np.digitize(acc.samples[:, 0], [-0.5, 0.5])
    N = np.zeros((3, 3))
    np.add.at(N, (b[:-1], b[1:]), 1)
    for i in range(3):
        for j in range(i + 1, 3):
            assert abs(N[i, j] - N[j, i]) <= 4 * np.sqrt(N[i, j] + N[j, i])


def test_mwg_diagnostics_csv(tmp_path):
    _, diag = mwg_run(GaussianTarget.standard(2), np.zeros(2), 5, 5, seed=0)
    diag.write_csv(tmp_path / "d.csv")
    lines = (tmp_path / "d.csv").read_text().splitlines()
    assert lines[0] == "iteration,energy,mean_proposal_std,acceptance,divergent,tree_depth"
    assert len(lines) == 11


# ---------------------------------------------------------------- NUTS

def test_nuts_standard_gaussian_64():
    acc, diag = nuts_run(GaussianTarget.standard(64), np.zeros(64), 100, 8000, seed=0,
                         cfg=NutsConfig(keep_every=1))
    assert abs(diag.mean_accept - 0.8) < 0.05
    se = batch_means_se(acc.samples)
    assert np.mean(np.abs(acc.mean) < 3 * se) > 0.97
    assert np.allclose(acc.variance, 1.0, rtol=0.1)


def test_nuts_three_dim_gaussian():
    cov = np.array([[2.0, 0.5, 0.0], [0.5, 1.0, -0.3], [0.0, -0.3, 0.5]])
    mean = np.array([1.0, -2.0, 0.5])
    acc, _ = nuts_run(GaussianTarget(mean, cov), mean, 200, 20_000, seed=3, cfg=NutsConfig(keep_every=1))
    se = batch_means_se(acc.samples)
    assert np.all(np.abs(acc.mean - mean) < 3 * se)
    assert np.allclose(np.cov(acc.samples.T), cov, atol=0.08)


def test_nuts_cauchy_product_medians():
    acc, diag = nuts_run(CauchyProductTarget(4), np.zeros(4), 200, 20_000, seed=4, cfg=NutsConfig(keep_every=1))
    S = acc.samples
    med = np.median(S, axis=0)
    # batch medians give the Monte Carlo error of the median
    bm = np.median(S.reshape(20, -1, 4), axis=1)
    se = bm.std(axis=0, ddof=1) / np.sqrt(20)
    assert np.all(np.abs(med) < 3 * se)


def test_nuts_reproducible_with_frozen_step(tmp_path):
    t = GaussianTarget.standard(5)
    cfg = NutsConfig(step_size=0.4)
    a1, d1 = nuts_run(t, np.ones(5), 0, 200, seed=21, cfg=cfg)
    a2, d2 = nuts_run(t, np.ones(5), 0, 200, seed=21, cfg=cfg)
    assert a1.mean.tobytes() == a2.mean.tobytes() and a1.m2.tobytes() == a2.m2.tobytes()
    d1.write_csv(tmp_path / "n.csv")
    lines = (tmp_path / "n.csv").read_text().splitlines()
    assert lines[0] == "iteration,energy,step_size,acceptance,divergent,tree_depth"
    assert len(lines) == 201


def test_nuts_rejects_bad_inputs():
    t = GaussianTarget.standard(2)
    with pytest.raises(ValueError):
        nuts_run(t, np.zeros(2), 10, 0, seed=0)
    with pytest.raises(ValueError):
        nuts_run(t, np.array([np.nan, 0.0]), 10, 5, seed=0)


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 1000))
def test_dual_averaging_keeps_step_positive(seed):
    _, diag = nuts_run(GaussianTarget.standard(3), np.zeros(3), 30, 5, seed=seed)
    assert all(e > 0 for e in diag.step_size) and diag.final_step_size > 0
