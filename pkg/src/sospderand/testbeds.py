"""Small objectives with known second-order structure.

Used by the command line demo, the narrative scripts and the tests.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from .finite_diff import estimate_gradient_lipschitz
from .objective import FunctionObjective
from .optim import PGDConfig, SOSPReport, check_sosp, pgd_minimize
from .reparam import (
    MCConfig,
    ReparamObjective,
    SOSPBoundInput,
    cosh_hessian_lipschitz,
    cosh_sum,
    cosh_sum_grad,
    cosh_sum_hess,
    sosp_w_bound,
)


def saddle() -> FunctionObjective:
    """``x^2 - y^2``: a strict saddle at the origin, unbounded below."""
    return FunctionObjective(
        lambda v: v[0] ** 2 - v[1] ** 2,
        lambda v: np.array([2 * v[0], -2 * v[1]]),
        lambda v: np.diag([2.0, -2.0]),
        dim=2, L=2.0, K=0.0, lower_bounded=False,
    )


def quartic(radius: float = 1.0) -> FunctionObjective:
    """``x^4`` with Lipschitz constants valid on ``|x| <= radius``."""
    return FunctionObjective(
        lambda v: v[0] ** 4,
        lambda v: np.array([4 * v[0] ** 3]),
        lambda v: np.array([[12 * v[0] ** 2]]),
        dim=1, L=12 * radius**2, K=24 * radius,
    )


class CoshRun(NamedTuple):
    W: np.ndarray
    b: np.ndarray
    report: SOSPReport
    w_norm: float
    bound: float
    tolerance: float
    lam: float
    K: float


def cosh_weight_bound_run(
    *,
    rho: float = 1e-4,
    Delta: float = 0.1,
    k: int = 2,
    d: int = 2,
    samples: int = 2000,
    T: int = 3000,
    box: float = 3.0,
    seed: int = 0,
) -> CoshRun:
    """Train ``E sum cosh(W z + b) + lam ||W||^2`` with PGD and certify.

    ``K`` is the grid bound of ``|sinh|`` on ``[-box, box]`` and
    ``lam = (sqrt(K rho) + Delta)/2``. Certification uses a fresh bank with
    ten times the training samples. ``tolerance`` is three gradient standard
    errors mapped through the curvature floor ``2 lam - sqrt(K rho)``.
    """
    K = cosh_hessian_lipschitz(box)
    inp = SOSPBoundInput.from_delta(rho, K, Delta)
    lam = inp.lam
    obj = ReparamObjective(cosh_sum, cosh_sum_grad, cosh_sum_hess, k, d, lam,
                           MCConfig(samples, seed), K=K)
    rng = np.random.default_rng([seed, 7])
    p0 = obj.pack(rng.normal(0, 0.5, (k, d)), rng.normal(0, 0.5, k))
    obj.L = 2.0 * abs(estimate_gradient_lipschitz(obj, p0))
    p, _ = pgd_minimize(obj, p0, PGDConfig(T=T, perturb_threshold=rho / 10, perturb_cooldown=T // 3, seed=seed))
    check = obj.resampled(MCConfig(10 * samples, seed + 1))
    report = check_sosp(check, p, rho, K)
    W = p.get("W")
    floor = 2 * lam - math.sqrt(K * rho)
    tol = 3 * float(np.linalg.norm(check.gradient_se(p))) / floor
    return CoshRun(W, p.get("b"), report, float(np.linalg.norm(W)), sosp_w_bound(inp), tol, lam, K)
