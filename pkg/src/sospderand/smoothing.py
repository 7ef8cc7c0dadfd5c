"""Smooth surrogates for ReLU and hard threshold indicators.

All functions are vectorized over numpy arrays and come with analytic
first (and where needed second) derivatives.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

# ---------------------------------------------------------------------------
# smooth ReLU: (1/iota) log(1 + exp(iota x))
# ---------------------------------------------------------------------------


def relu_iota(x, iota: float = 2.0):
    x = np.asarray(x, dtype=float)
    return np.maximum(x, 0.0) + np.log1p(np.exp(-iota * np.abs(x))) / iota


def relu_iota_d1(x, iota: float = 2.0):
    return expit(iota * np.asarray(x, dtype=float))


def relu_iota_d2(x, iota: float = 2.0):
    s = expit(iota * np.asarray(x, dtype=float))
    return iota * s * (1.0 - s)


def relu_iota_d3(x, iota: float = 2.0):
    s = expit(iota * np.asarray(x, dtype=float))
    return iota**2 * s * (1.0 - s) * (1.0 - 2.0 * s)


@dataclass(frozen=True)
class SmoothRelu:
    iota: float = 2.0

    def __post_init__(self):
        if not (math.isfinite(self.iota) and self.iota > 0):
            raise ValueError("iota must be finite and positive")

    def __call__(self, x):
        return relu_iota(x, self.iota)

    def d1(self, x):
        return relu_iota_d1(x, self.iota)

    def d2(self, x):
        return relu_iota_d2(x, self.iota)

    def value_d1(self, x):
        """Value and first derivative sharing one exponential."""
        x = np.asarray(x, dtype=float)
        e = np.exp(-self.iota * np.abs(x))
        inv = 1.0 / (1.0 + e)
        return np.maximum(x, 0.0) + np.log1p(e) / self.iota, np.where(x >= 0, inv, e * inv)

    @property
    def L(self) -> float:
        return self.iota / 4.0

    @property
    def K(self) -> float:
        return math.sqrt(3.0) * self.iota**2 / 9.0


# ---------------------------------------------------------------------------
# piecewise-quadratic step S and the sign-disagreement indicator
# ---------------------------------------------------------------------------


def _check_positive(name, v):
    if not v > 0:
        raise ValueError(f"{name} must be positive, got {v}")


def step_smooth(x, eps: float):
    """0 below eps/2, 1 from eps on, two quadratic pieces meeting at 3 eps/4."""
    _check_positive("eps", eps)
    x = np.asarray(x, dtype=float)
    c = 8.0 / eps**2
    lo = (x > eps / 2) & (x <= 0.75 * eps)
    hi = (x > 0.75 * eps) & (x < eps)
    out = np.where(x >= eps, 1.0, 0.0)
    out = np.where(lo, c * (x - eps / 2) ** 2, out)
    out = np.where(hi, 1.0 - c * (x - eps) ** 2, out)
    return out


def step_smooth_d1(x, eps: float):
    _check_positive("eps", eps)
    x = np.asarray(x, dtype=float)
    c = 16.0 / eps**2
    lo = (x > eps / 2) & (x <= 0.75 * eps)
    hi = (x > 0.75 * eps) & (x < eps)
    out = np.zeros_like(x)
    out = np.where(lo, c * (x - eps / 2), out)
    out = np.where(hi, c * (eps - x), out)
    return out


def step_smooth_d2(x, eps: float):
    _check_positive("eps", eps)
    x = np.asarray(x, dtype=float)
    c = 16.0 / eps**2
    lo = (x > eps / 2) & (x <= 0.75 * eps)
    hi = (x > 0.75 * eps) & (x < eps)
    return np.where(lo, c, 0.0) - np.where(hi, c, 0.0)


def sign_disagree_smooth(x, y, eps: float):
    """Smoothed indicator of ``x`` and ``y`` having different signs."""
    return step_smooth(x, eps) * step_smooth(-np.asarray(y), eps) + step_smooth(
        -np.asarray(x), eps
    ) * step_smooth(y, eps)


def sign_disagree_smooth_grad(x, y, eps: float):
    """Partial derivatives of :func:`sign_disagree_smooth` w.r.t. ``x`` and ``y``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    Sx, Smx = step_smooth(x, eps), step_smooth(-x, eps)
    Sy, Smy = step_smooth(y, eps), step_smooth(-y, eps)
    dSx, dSmx = step_smooth_d1(x, eps), step_smooth_d1(-x, eps)
    dSy, dSmy = step_smooth_d1(y, eps), step_smooth_d1(-y, eps)
    dx = dSx * Smy - dSmx * Sy
    dy = -Sx * dSmy + Smx * dSy
    return dx, dy


@dataclass(frozen=True)
class StepSmoothing:
    eps: float

    def __post_init__(self):
        _check_positive("eps", self.eps)

    def __call__(self, x):
        return step_smooth(x, self.eps)

    def d1(self, x):
        return step_smooth_d1(x, self.eps)

    def disagree(self, x, y):
        return sign_disagree_smooth(x, y, self.eps)

    @property
    def L(self) -> float:
        return 16.0 / self.eps**2

    @property
    def K(self) -> float:
        # d2 is piecewise constant; nominal order-1/eps^3 constant: largest
        # jump (32/eps^2) spread over half the ramp width.
        return 64.0 / self.eps**3


# ---------------------------------------------------------------------------
# piecewise-cubic distortion indicator
# ---------------------------------------------------------------------------


def _jl_check(t, eps, eps1):
    _check_positive("eps", eps)
    _check_positive("eps1", eps1)
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("distortion magnitude t must be nonnegative")
    return t


def jl_indicator_smooth(t, eps: float, eps1: float):
    """0 up to eps, 1 from eps + eps1, cubic smoothstep in between."""
    t = _jl_check(t, eps, eps1)
    c = 4.0 / eps1**3
    mid = eps + eps1 / 2
    lo = (t > eps) & (t <= mid)
    hi = (t > mid) & (t < eps + eps1)
    out = np.where(t >= eps + eps1, 1.0, 0.0)
    out = np.where(lo, c * (t - eps) ** 3, out)
    out = np.where(hi, 1.0 - c * (eps + eps1 - t) ** 3, out)
    return out


def jl_indicator_smooth_d1(t, eps: float, eps1: float):
    t = _jl_check(t, eps, eps1)
    c = 12.0 / eps1**3
    mid = eps + eps1 / 2
    lo = (t > eps) & (t <= mid)
    hi = (t > mid) & (t < eps + eps1)
    out = np.where(lo, c * (t - eps) ** 2, 0.0)
    return np.where(hi, c * (eps + eps1 - t) ** 2, out)


def jl_indicator_smooth_d2(t, eps: float, eps1: float):
    t = _jl_check(t, eps, eps1)
    c = 24.0 / eps1**3
    mid = eps + eps1 / 2
    lo = (t > eps) & (t <= mid)
    hi = (t > mid) & (t < eps + eps1)
    out = np.where(lo, c * (t - eps), 0.0)
    return np.where(hi, -c * (eps + eps1 - t), out)


@dataclass(frozen=True)
class JLIndicatorSmoothing:
    eps: float
    eps1: float

    def __post_init__(self):
        _check_positive("eps", self.eps)
        _check_positive("eps1", self.eps1)
        if self.eps1 > self.eps:
            warnings.warn(
                f"smoothing width eps1={self.eps1} exceeds threshold eps={self.eps}",
                stacklevel=2,
            )

    def __call__(self, t):
        return jl_indicator_smooth(t, self.eps, self.eps1)

    def d1(self, t):
        return jl_indicator_smooth_d1(t, self.eps, self.eps1)

    def d2(self, t):
        return jl_indicator_smooth_d2(t, self.eps, self.eps1)

    @property
    def L(self) -> float:
        return 12.0 / self.eps1**2

    @property
    def K(self) -> float:
        return 24.0 / self.eps1**3
