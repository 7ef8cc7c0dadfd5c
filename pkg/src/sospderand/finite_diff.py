"""Central-difference derivatives and Lipschitz-constant estimates.

Used to verify analytic derivatives and to size step lengths for objectives
whose constants are not known in closed form.
"""

from __future__ import annotations

import numpy as np

from .errors import NumericalAbort
from .params import as_array


def _value_fn(obj):
    return obj.value if hasattr(obj, "value") else obj


def fd_gradient(obj, p, step: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of ``obj`` (an objective or a callable)."""
    if not step > 0:
        raise ValueError("step must be positive")
    f = _value_fn(obj)
    x = as_array(p).astype(float)
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = step
        g[i] = (f(x + e) - f(x - e)) / (2 * step)
    if not np.all(np.isfinite(g)):
        raise NumericalAbort("non-finite finite-difference gradient")
    return g


def fd_hessian(obj, p, step: float = 1e-5) -> np.ndarray:
    """Symmetrized central-difference Hessian.

    Differences the analytic gradient when ``obj`` has one, otherwise uses
    second differences of the value.
    """
    if not step > 0:
        raise ValueError("step must be positive")
    x = as_array(p).astype(float)
    n = x.size
    H = np.empty((n, n))
    if hasattr(obj, "gradient"):
        for i in range(n):
            e = np.zeros(n)
            e[i] = step
            H[:, i] = (obj.gradient(x + e) - obj.gradient(x - e)) / (2 * step)
    else:
        f = _value_fn(obj)
        f0 = f(x)
        for i in range(n):
            ei = np.zeros(n)
            ei[i] = step
            H[i, i] = (f(x + ei) - 2 * f0 + f(x - ei)) / step**2
            for j in range(i + 1, n):
                ej = np.zeros(n)
                ej[j] = step
                H[i, j] = (
                    f(x + ei + ej) - f(x + ei - ej) - f(x - ei + ej) + f(x - ei - ej)
                ) / (4 * step**2)
                H[j, i] = H[i, j]
    if not np.all(np.isfinite(H)):
        raise NumericalAbort("non-finite finite-difference Hessian")
    return 0.5 * (H + H.T)


def fd_hvp(obj, p, v, step: float = 1e-5) -> np.ndarray:
    x = as_array(p)
    v = np.asarray(v, dtype=float)
    return (obj.gradient(x + step * v) - obj.gradient(x - step * v)) / (2 * step)


def estimate_gradient_lipschitz(obj, p, *, iters: int = 60, seed: int = 0) -> float:
    """Largest |eigenvalue| of the Hessian at ``p`` by power iteration.

    Falls back to finite-difference Hessian-vector products when the
    objective has none.
    """
    x = as_array(p)
    hvp = (lambda v: obj.hvp(x, v)) if obj.has_hvp else (lambda v: fd_hvp(obj, x, v))
    v = np.random.default_rng(seed).standard_normal(x.size)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iters):
        w = hvp(v)
        nw = float(np.linalg.norm(w))
        if nw == 0.0:
            return 0.0
        lam = nw
        v = w / nw
    return lam


def estimate_hessian_lipschitz(
    hessian_fn,
    p,
    *,
    probes: int = 10,
    radius: float = 1e-2,
    safety: float = 3.0,
    seed: int = 0,
) -> float:
    """Sampled ``||H(p + d) - H(p)||_2 / ||d||`` over random ``d`` of norm ``radius``, times ``safety``."""
    x = as_array(p)
    rng = np.random.default_rng(seed)
    H0 = hessian_fn(x)
    worst = 0.0
    for _ in range(probes):
        d = rng.standard_normal(x.size)
        d *= radius / np.linalg.norm(d)
        diff = hessian_fn(x + d) - H0
        worst = max(worst, float(np.linalg.norm(diff, 2)) / radius)
    return safety * worst
