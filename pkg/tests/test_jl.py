import math

import numpy as np
import pytest
from scipy import integrate

from sospderand.finite_diff import fd_gradient
from sospderand.jl import (
    JLConfig,
    JLDataset,
    JLObjective,
    ProjDistribution,
    distortion,
    distortion_report,
    distortions,
    extract_deterministic,
    jl_guarantee_check,
    jl_objective,
    learn_projection,
    random_dataset,
    random_gaussian_baseline,
    read_dataset,
    write_jl_csv,
    write_matrix,
)
from sospderand.optim import PGDConfig, pgd_minimize
from sospderand.reparam import MCConfig
from sospderand.smoothing import jl_indicator_smooth


def partial_identity(k, d):
    A = np.zeros((k, d))
    A[np.arange(k), np.arange(k)] = math.sqrt(k)
    return A


# ---------------------------------------------------------------------------
# distortion and baselines
# ---------------------------------------------------------------------------


def test_distortion_examples():
    e1 = np.eye(6)[0]
    assert distortion(partial_identity(3, 6), e1) == pytest.approx(0.0, abs=1e-15)
    assert distortion(np.zeros((3, 6)), e1) == 1.0
    with pytest.raises(ValueError):
        distortion(np.eye(2), np.array([1.0, 1.0]))


def test_gaussian_matrix_preserves_norm_in_mean():
    rng = np.random.default_rng(0)
    k, d = 5, 8
    x = rng.standard_normal(d)
    x /= np.linalg.norm(x)
    A = rng.standard_normal((10**4, k, d))
    vals = np.sum((A @ x) ** 2, axis=1) / k
    se = vals.std(ddof=1) / math.sqrt(vals.size)
    assert abs(vals.mean() - 1) < 3 * se


def test_dataset_normalizes_rows(tmp_path):
    ds = JLDataset(np.array([[3.0, 4.0], [0.0, 2.0]]))
    np.testing.assert_allclose(ds.X, [[0.6, 0.8], [0.0, 1.0]])
    write_matrix(np.array([[3.0, 4.0]]), tmp_path / "x.txt")
    np.testing.assert_allclose(read_dataset(tmp_path / "x.txt").X, [[0.6, 0.8]])
    with pytest.raises(ValueError):
        JLDataset(np.zeros((2, 3)))


def test_baseline_concentrates_for_single_point():
    ds = random_dataset(1, 20, seed=0)
    for seed in range(3):
        assert random_gaussian_baseline(ds, 1000, trials=20, seed=seed).mean_maxdist < 0.15


def test_baseline_properties():
    ds = random_dataset(10, 30, seed=1)
    b = random_gaussian_baseline(ds, 8, trials=200, seed=0)
    assert 0 <= b.min_maxdist <= b.mean_maxdist
    assert b == random_gaussian_baseline(ds, 8, trials=200, seed=0)
    with pytest.raises(ValueError):
        random_gaussian_baseline(ds, 8, trials=0)


def test_duplicate_points_share_distortion():
    x = random_dataset(1, 10, seed=2).X
    ds = JLDataset(np.vstack([x, x]))
    rep = distortion_report(np.random.default_rng(0).standard_normal((4, 10)), ds)
    assert rep.per_point[0] == rep.per_point[1]
    assert rep.max == rep.per_point.max()
    assert rep.violations(-1.0) == 2


def test_guarantee_check():
    ds = JLDataset(np.eye(6)[:3])
    ok, rep = jl_guarantee_check(partial_identity(3, 6), ds, 1e-12)
    assert ok and rep.max < 1e-15
    ok, _ = jl_guarantee_check(np.zeros((3, 6)), ds, 0.99)
    assert not ok


# ---------------------------------------------------------------------------
# smoothed objective
# ---------------------------------------------------------------------------


def test_objective_zero_for_exact_embedding():
    ds = JLDataset(np.eye(6)[:3])
    pd = ProjDistribution(partial_identity(3, 6), np.zeros((3, 6)))
    obj = jl_objective(pd, ds, eps=0.1, eps1=0.1, mc=MCConfig(16))
    assert obj.value(obj.pack(pd)) == 0.0
    assert obj.gradient(obj.pack(pd)) @ obj.gradient(obj.pack(pd)) == 0.0


def test_objective_regularizer_at_init_is_half():
    ds = random_dataset(5, 7, seed=0)
    pd = ProjDistribution.initial(3, 7)
    obj = jl_objective(pd, ds, 0.2, 0.2, mc=MCConfig(32))
    p = obj.pack(pd)
    indicator = obj.value(p) - obj.reg * np.sum(pd.sigma**2)
    assert obj.reg * np.sum(pd.sigma**2) == 0.5
    assert obj.value(p) == pytest.approx(indicator + 0.5, abs=1e-15)


def test_objective_one_dimensional_quadrature():
    eps, eps1, m, s = 0.25, 0.5, 0.8, 0.6
    ds = JLDataset(np.ones((1, 1)))
    pd = ProjDistribution(np.array([[m]]), np.array([[s]]))
    obj = JLObjective(ds, 1, eps, eps1, MCConfig(2 * 10**6, seed=5), reg=0.0)

    def integrand(z):
        a = m + s * z
        return jl_indicator_smooth(abs(a * a - 1), eps, eps1) * math.exp(-z * z / 2) / math.sqrt(2 * math.pi)

    cuts = [c for c in (1 + eps, 1 + eps + eps1 / 2, 1 + eps + eps1, 1 - eps, 1 - eps - eps1 / 2) if c > 0]
    pts = sorted(((sg * math.sqrt(c)) - m) / s for c in cuts for sg in (-1, 1))
    oracle = integrate.quad(integrand, -12, 12, points=pts, limit=400)[0]
    assert obj.value(obj.pack(pd)) == pytest.approx(oracle, abs=1e-3)


def test_objective_gradient_matches_fd():
    ds = random_dataset(4, 5, seed=3)
    obj = JLObjective(ds, 3, 0.2, 0.4, MCConfig(20, seed=1))
    rng = np.random.default_rng(0)
    x = np.concatenate([np.abs(rng.normal(0.5, 0.2, 15)), rng.normal(0, 0.5, 15)])
    fd = fd_gradient(obj, x)
    np.testing.assert_allclose(obj.gradient(x), fd, rtol=1e-4, atol=1e-6)


def test_union_bound_and_sandwich_on_common_bank():
    ds = random_dataset(8, 10, seed=4)
    obj = JLObjective(ds, 4, 0.3, 0.3, MCConfig(500, seed=2))
    pd = ProjDistribution(0.5 * np.random.default_rng(1).standard_normal((4, 10)), np.full((4, 10), 0.7))
    any_v, per, smooth, band = obj.violation_frequencies(obj.pack(pd))
    assert any_v.mean() <= per.mean(0).sum()
    freq = per.mean(0)
    assert np.all(smooth.mean(0) <= freq + 1e-15)
    assert np.all(freq <= smooth.mean(0) + band.mean(0) + 1e-15)


def test_objective_validation():
    with pytest.raises(ValueError):
        JLObjective(random_dataset(2, 3), 2, 0.0, 0.1, MCConfig(4))
    with pytest.raises(ValueError):
        ProjDistribution(np.zeros((2, 2)), -np.ones((2, 2)))


# ---------------------------------------------------------------------------
# mean extraction
# ---------------------------------------------------------------------------


def test_extract_zero_sigma():
    pd = ProjDistribution(np.ones((3, 4)), np.zeros((3, 4)))
    M, ex = extract_deterministic(pd, 0.3)
    np.testing.assert_array_equal(M, pd.M)
    assert ex.upper == 0.0 and ex.lower == 0.0


def test_extract_example_value():
    pd = ProjDistribution(np.zeros((30, 5)), np.full((30, 5), 0.1))
    _, ex = extract_deterministic(pd, 0.3)
    assert ex.upper == pytest.approx(2 * math.sqrt(2) * 0.1 / 30 * math.sqrt(1.3) + 0.02)
    assert ex.upper == pytest.approx(0.0308, abs=1e-4)
    assert ex.lower == pytest.approx(0.01) and ex.lower_factor == 0.5


def test_extract_monotone_in_sigma():
    ups = [extract_deterministic(ProjDistribution(np.zeros((10, 3)), np.full((10, 3), s)), 0.2)[1].upper
           for s in (0.0, 0.01, 0.1, 0.5, 1.0)]
    assert all(a < b for a, b in zip(ups, ups[1:]))


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------


SMALL = dict(T=1500, eps=0.02, eps1=1.0, seed=0)


def test_learned_projection_beats_random_baseline():
    ds = random_dataset(20, 30, seed=0)
    res = learn_projection(ds, 10, JLConfig(**SMALL))
    base = random_gaussian_baseline(ds, 10, trials=500, seed=1)
    ok, rep = jl_guarantee_check(res.M, ds, 0.15)
    assert ok
    assert rep.max < base.min_maxdist
    assert res.trajectory[-1].max_sigma2 < res.trajectory[0].max_sigma2


def test_learning_is_deterministic():
    ds = random_dataset(10, 12, seed=1)
    cfg = JLConfig(T=200, seed=3)
    a, b = learn_projection(ds, 5, cfg), learn_projection(ds, 5, cfg)
    np.testing.assert_array_equal(a.M, b.M)
    assert a.trajectory == b.trajectory


def test_early_stop_and_logging():
    ds = random_dataset(10, 12, seed=1)
    res = learn_projection(ds, 5, JLConfig(T=400, early_stop=10.0, log_every=50))
    assert len(res.trajectory) == 1 and res.trajectory[0].iter == 1
    res = learn_projection(ds, 5, JLConfig(T=400, log_every=50))
    assert [r.iter for r in res.trajectory][:2] == [50, 100]


def test_pgd_variant_reduces_objective():
    ds = random_dataset(6, 8, seed=2)
    cfg = JLConfig(T=300, optimizer="pgd", lr=0.05, samples=16, log_every=30)
    res = learn_projection(ds, 4, cfg)
    assert len(res.trajectory) == 10
    assert np.all(res.pd.sigma >= 0)
    lam = (math.sqrt(cfg.rho / cfg.eps1**3) + cfg.Delta) / 2
    obj = JLObjective(ds, 4, cfg.eps, cfg.eps1, MCConfig(cfg.samples, cfg.seed), reg=lam)
    _, rows = pgd_minimize(obj, obj.template(), PGDConfig(T=cfg.T, eta=cfg.lr))
    values = np.array([r.value for r in rows])
    assert np.all(values[cfg.T // 10:] < values[0])


def test_config_validation(tmp_path):
    with pytest.raises(ValueError):
        JLConfig(optimizer="sgd")
    with pytest.raises(ValueError):
        JLConfig(batch=0)
    with pytest.raises(ValueError):
        learn_projection(random_dataset(3, 3), 0)
    res = learn_projection(random_dataset(3, 4), 2, JLConfig(T=3))
    write_jl_csv(res.trajectory, tmp_path / "t.csv")
    assert (tmp_path / "t.csv").read_text().splitlines()[0] == "iter,distortion,max_sigma2"


def test_distortions_vectorized_matches_scalar():
    ds = random_dataset(5, 6, seed=9)
    A = np.random.default_rng(0).standard_normal((3, 6))
    np.testing.assert_allclose(distortions(A, ds.X), [distortion(A, x) for x in ds.X], rtol=1e-13)
