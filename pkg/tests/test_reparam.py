import math

import numpy as np
import pytest
from scipy import integrate

from sospderand.errors import NumericalAbort
from sospderand.finite_diff import fd_gradient, fd_hessian
from sospderand.reparam import (
    BLOCK,
    GaussianReparam,
    MCConfig,
    ReparamObjective,
    SOSPBoundInput,
    cosh_sum,
    cosh_sum_expectation,
    cosh_sum_grad,
    cosh_sum_hess,
    gaussian_samples,
    mc_gradient,
    mc_value,
    sosp_w_bound,
    stein_residual,
)
from sospderand.smoothing import jl_indicator_smooth
from sospderand.testbeds import cosh_weight_bound_run


def sq(U):
    return np.sum(U * U, axis=-1)


def half_sq_grad(U):
    return U


def identity_hess(U):
    return np.broadcast_to(np.eye(U.shape[-1]), U.shape + (U.shape[-1],))


def tanh_link(a):
    return (lambda U: np.tanh(U) @ a,
            lambda U: a * (1 - np.tanh(U) ** 2),
            lambda U: np.einsum("...i,ij->...ij", -2 * a * np.tanh(U) * (1 - np.tanh(U) ** 2), np.eye(a.size)))


# ---------------------------------------------------------------------------
# mc_value
# ---------------------------------------------------------------------------


def test_mc_value_constant_is_exact():
    est = mc_value(lambda U: np.full(U.shape[0], 3.25), np.ones((2, 3)), np.zeros(2), MCConfig(5000))
    assert est.mean == 3.25
    assert est.se == 0.0


def test_mc_value_second_moment():
    est = mc_value(sq, np.eye(2), np.zeros(2), MCConfig(10**6, seed=4))
    assert abs(est.mean - 2.0) < 3 * est.se


def test_mc_value_jl_term_matches_quadrature():
    eps, eps1 = 0.3, 0.3
    g = lambda U: jl_indicator_smooth(np.abs(U[:, 0] ** 2 - 1), eps, eps1)  # noqa: E731
    est = mc_value(g, np.eye(1), np.zeros(1), MCConfig(4 * 10**6, seed=1))
    offsets = (eps, eps + eps1 / 2, eps + eps1, -eps, -eps - eps1 / 2)
    kinks = sorted({s * math.sqrt(1 + c) for s in (-1, 1) for c in offsets if 1 + c >= 0})

    def integrand(z):
        return jl_indicator_smooth(abs(z * z - 1), eps, eps1) * math.exp(-z * z / 2) / math.sqrt(2 * math.pi)

    oracle = integrate.quad(integrand, -12, 12, points=kinks, limit=400)[0]
    assert abs(est.mean - oracle) < 1e-3


def test_mc_value_deterministic_given_seed():
    cfg = MCConfig(3000, seed=9)
    a = mc_value(sq, np.eye(2), np.ones(2), cfg)
    b = mc_value(sq, np.eye(2), np.ones(2), cfg)
    assert a == b


@pytest.mark.parametrize("chunk,workers", [(BLOCK, 1), (3 * BLOCK, 1), (100 * BLOCK, 1), (BLOCK, 4)])
def test_chunking_does_not_change_results(chunk, workers):
    W = np.array([[0.3, -0.2], [0.1, 0.5]])
    b = np.array([0.2, -0.1])
    ref_cfg = MCConfig(5 * BLOCK + 17, seed=2)
    cfg = MCConfig(5 * BLOCK + 17, seed=2, chunk=chunk, workers=workers)
    assert mc_value(cosh_sum, W, b, cfg) == mc_value(cosh_sum, W, b, ref_cfg)
    for x, y in zip(mc_gradient(cosh_sum_grad, W, b, cfg), mc_gradient(cosh_sum_grad, W, b, ref_cfg)):
        np.testing.assert_array_equal(x, y)


def test_nonfinite_sample_reports_index():
    target = BLOCK + 5

    def g(U):
        out = np.zeros(U.shape[0])
        Z = U  # W = I, b = 0
        hit = np.isclose(Z, gaussian_samples(1, MCConfig(target + 1, seed=0))[target]).all(1)
        out[hit] = np.nan
        return out

    with pytest.raises(NumericalAbort) as exc:
        mc_value(g, np.eye(1), np.zeros(1), MCConfig(2 * BLOCK, seed=0))
    assert exc.value.index == target


# ---------------------------------------------------------------------------
# mc_gradient
# ---------------------------------------------------------------------------


def test_common_random_numbers_with_value():
    W = np.array([[0.4, 0.1, -0.3]])
    b = np.array([0.2])
    cfg = MCConfig(2500, seed=5)
    Z = gaussian_samples(3, cfg)
    U = Z @ W.T + b
    assert math.isclose(mc_value(cosh_sum, W, b, cfg).mean, float(cosh_sum(U).mean()), rel_tol=1e-13)
    dW, db = mc_gradient(cosh_sum_grad, W, b, cfg)
    np.testing.assert_allclose(dW, cosh_sum_grad(U).T @ Z / len(Z), rtol=1e-12)
    np.testing.assert_allclose(db, cosh_sum_grad(U).mean(0), rtol=1e-12)


def test_linear_g_gradient():
    a = np.array([1.5, -2.0])
    W = np.array([[0.3, 0.2, 0.1], [0.0, -0.4, 0.5]])
    dW, db, dW_se, _ = mc_gradient(lambda U: np.broadcast_to(a, U.shape), W, np.zeros(2),
                                   MCConfig(10**5, seed=3), return_se=True)
    np.testing.assert_array_equal(db, a)
    assert np.linalg.norm(dW) < 5 * np.linalg.norm(dW_se)


def test_quadratic_g_gradient_recovers_parameters():
    W = np.array([[0.5, -0.3], [0.2, 0.7]])
    b = np.array([0.4, -1.0])
    dW, db, dW_se, db_se = mc_gradient(half_sq_grad, W, b, MCConfig(10**5, seed=8), return_se=True)
    assert np.all(np.abs(dW - W) < 5 * dW_se)
    assert np.all(np.abs(db - b) < 5 * db_se)


def test_gradient_matches_fd_of_value_under_crn():
    k, d = 2, 3
    rng = np.random.default_rng(0)
    W = 0.4 * rng.standard_normal((k, d))
    b = 0.3 * rng.standard_normal(k)
    cfg = MCConfig(4000, seed=11)

    def f(theta):
        return mc_value(cosh_sum, theta[: k * d].reshape(k, d), theta[k * d:], cfg).mean

    dW, db = mc_gradient(cosh_sum_grad, W, b, cfg)
    analytic = np.concatenate([dW.ravel(), db])
    fd = fd_gradient(f, np.concatenate([W.ravel(), b]), step=1e-5)
    np.testing.assert_allclose(analytic, fd, rtol=1e-5, atol=1e-9)


# ---------------------------------------------------------------------------
# Stein residual
# ---------------------------------------------------------------------------


def test_stein_quadratic_within_standard_errors():
    W = np.array([[0.5, 0.1], [-0.2, 0.3]])
    b = np.array([0.3, -0.6])
    cfg = MCConfig(10**5, seed=6)
    res = stein_residual(half_sq_grad, identity_hess, W, b, cfg)
    Z = gaussian_samples(2, cfg)
    U = Z @ W.T + b
    per = U[:, :, None] * Z[:, None, :] - W[None]
    se = per.std(0, ddof=1) / math.sqrt(len(Z))
    assert res < 5 * np.linalg.norm(se)


def test_stein_zero_w_reduces_to_first_term():
    a = np.array([1.0, -0.5, 2.0])
    g, gg, hg = tanh_link(a)
    b = np.array([0.1, 0.2, -0.3])
    cfg = MCConfig(20000, seed=1)
    W = np.zeros((3, 3))
    res = stein_residual(gg, hg, W, b, cfg)
    dW, _ = mc_gradient(gg, W, b, cfg)
    assert math.isclose(res, float(np.linalg.norm(dW)), rel_tol=1e-12)


def test_stein_residual_shrinks_like_inverse_root_n():
    rng = np.random.default_rng(0)
    a = rng.standard_normal(3)
    _, gg, hg = tanh_link(a)
    ns = np.array([10**3, 10**4, 10**5])
    logs = []
    for seed in range(5):
        W = rng.standard_normal((3, 3))
        W *= 0.5 / np.linalg.norm(W)
        b = 0.5 * rng.standard_normal(3)
        logs.append([math.log(stein_residual(gg, hg, W, b, MCConfig(int(n), seed=seed))) for n in ns])
    slope = np.polyfit(np.log(ns), np.mean(logs, axis=0), 1)[0]
    assert -0.65 <= slope <= -0.35


# ---------------------------------------------------------------------------
# bound calculator
# ---------------------------------------------------------------------------


def test_bound_with_zero_K():
    assert sosp_w_bound(SOSPBoundInput(rho=0.2, lam=0.5, K=0.0)) == pytest.approx(0.2)


def test_bound_from_delta_is_rho_over_delta():
    inp = SOSPBoundInput.from_delta(rho=1e-4, K=7.0, Delta=0.1)
    assert sosp_w_bound(inp) == pytest.approx(1e-3, rel=1e-12)


def test_bound_vanishes_with_rho():
    vals = [sosp_w_bound(SOSPBoundInput(rho=r, lam=0.3, K=2.0)) for r in (1e-2, 1e-4, 1e-6, 1e-8)]
    assert all(x > y for x, y in zip(vals, vals[1:]))
    assert vals[-1] < 1e-7


def test_bound_requires_large_enough_lambda():
    with pytest.raises(ValueError):
        SOSPBoundInput(rho=1.0, lam=0.5, K=1.0)
    with pytest.raises(ValueError):
        SOSPBoundInput.from_delta(rho=1.0, K=1.0, Delta=0.0)


# ---------------------------------------------------------------------------
# sample-average objective and the cosh testbed
# ---------------------------------------------------------------------------


def _cosh_obj(lam=0.05, samples=3000):
    return ReparamObjective(cosh_sum, cosh_sum_grad, cosh_sum_hess, 2, 2, lam, MCConfig(samples, seed=3))


def test_objective_value_is_mc_value_plus_penalty():
    obj = _cosh_obj()
    W = np.array([[0.2, -0.1], [0.3, 0.4]])
    b = np.array([0.1, -0.2])
    p = obj.pack(W, b)
    expected = mc_value(cosh_sum, W, b, obj.mc).mean + obj.lam * np.sum(W * W)
    assert obj.value(p) == pytest.approx(expected, rel=1e-13)


def test_objective_derivatives_match_fd():
    obj = _cosh_obj()
    rng = np.random.default_rng(4)
    for _ in range(5):
        x = 0.4 * rng.standard_normal(obj.dim)
        np.testing.assert_allclose(obj.gradient(x), fd_gradient(obj, x), rtol=1e-4, atol=1e-8)
        np.testing.assert_allclose(obj.hessian(x), fd_hessian(obj, x), rtol=1e-3, atol=1e-6)


def test_objective_close_to_closed_form():
    obj = _cosh_obj(samples=200000)
    W = np.array([[0.3, 0.1], [0.0, 0.2]])
    b = np.array([0.5, -0.4])
    p = obj.pack(W, b)
    se = obj.value_se(p)
    assert abs(obj.value(p) - obj.lam * np.sum(W * W) - cosh_sum_expectation(W, b)) < 4 * se


def test_cosh_weight_bound_end_to_end():
    run = cosh_weight_bound_run(seed=0)
    assert run.report.certified
    assert run.w_norm <= run.bound + run.tolerance
    assert run.bound == pytest.approx(1e-3)


def test_gaussian_reparam_sample():
    gr = GaussianReparam(np.arange(6.0), np.full(6, 0.5), (2, 3))
    z = np.ones(6)
    np.testing.assert_allclose(gr.sample(z), np.arange(6.0).reshape(2, 3) + 0.5)
    with pytest.raises(ValueError):
        GaussianReparam(np.zeros(2), -np.ones(2), (1, 2))


def test_mc_config_validation():
    with pytest.raises(ValueError):
        MCConfig(0)
    with pytest.raises(ValueError):
        MCConfig(10, chunk=0)
