"""Monte Carlo machinery for objectives ``E_z[g(W z + b)] + lam ||W||_F^2``.

Standard-normal draws are produced in fixed blocks of ``BLOCK`` rows, block
``i`` seeded by ``(seed, i)``. Every estimator sums per-block partial sums
in block order, so results depend only on ``(seed, samples)`` and never on
how blocks are grouped into work chunks or threads.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .errors import NumericalAbort
from .objective import SmoothObjective
from .params import ParamVector, as_array

BLOCK = 4096


@dataclass(frozen=True)
class MCConfig:
    samples: int
    seed: int = 0
    chunk: int = 4 * BLOCK
    workers: int = 1

    def __post_init__(self):
        if self.samples < 1:
            raise ValueError("samples must be >= 1")
        if self.chunk < 1 or self.workers < 1:
            raise ValueError("chunk and workers must be positive")


class MCEstimate(NamedTuple):
    mean: float
    se: float


def _block_sizes(samples):
    n_full, rest = divmod(samples, BLOCK)
    return [BLOCK] * n_full + ([rest] if rest else [])


def normal_block(seed: int, index: int, rows: int, dim: int) -> np.ndarray:
    return np.random.default_rng([seed, index]).standard_normal((rows, dim))


def gaussian_samples(dim: int, mc: MCConfig) -> np.ndarray:
    """The full ``(samples, dim)`` standard-normal stream for ``mc``."""
    sizes = _block_sizes(mc.samples)
    return np.concatenate([normal_block(mc.seed, i, r, dim) for i, r in enumerate(sizes)])


def _reduce_blocks(mc: MCConfig, dim: int, block_fn):
    """Apply ``block_fn(Z, start)`` to each block; return the per-block results in order."""
    sizes = _block_sizes(mc.samples)
    starts = np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(int)

    def run(i):
        return block_fn(normal_block(mc.seed, i, sizes[i], dim), int(starts[i]))

    per_chunk = max(1, mc.chunk // BLOCK)
    groups = [range(j, min(j + per_chunk, len(sizes))) for j in range(0, len(sizes), per_chunk)]
    if mc.workers > 1 and len(groups) > 1:
        with ThreadPoolExecutor(mc.workers) as pool:
            nested = list(pool.map(lambda grp: [run(i) for i in grp], groups))
    else:
        nested = [[run(i) for i in grp] for grp in groups]
    return [r for grp in nested for r in grp]


def _first_bad(arr, start):
    bad = ~np.isfinite(arr.reshape(arr.shape[0], -1)).all(axis=1)
    return start + int(np.argmax(bad))


def _check(arr, start):
    if not np.all(np.isfinite(arr)):
        idx = _first_bad(arr, start)
        raise NumericalAbort(f"non-finite Monte Carlo sample at index {idx}", index=idx)


def _mean_se(total, total_sq, n):
    mean = total / n
    if n < 2:
        return mean, np.full_like(np.asarray(mean, dtype=float), np.inf)
    var = np.maximum(total_sq / n - mean**2, 0.0) * n / (n - 1)
    return mean, np.sqrt(var / n)


def _affine(W, b):
    W = np.atleast_2d(np.asarray(W, dtype=float))
    b = np.asarray(b, dtype=float).reshape(W.shape[0])
    return W, b


def mc_value(g: Callable[[np.ndarray], np.ndarray], W, b, mc: MCConfig) -> MCEstimate:
    """Sample mean and standard error of ``g(W z + b)``, ``z ~ N(0, I_d)``.

    ``g`` maps an ``(S, k)`` array of points to ``S`` values.
    """
    W, b = _affine(W, b)

    def block(Z, start):
        v = np.asarray(g(Z @ W.T + b), dtype=float).reshape(Z.shape[0])
        _check(v, start)
        return v.sum(), (v * v).sum()

    parts = _reduce_blocks(mc, W.shape[1], block)
    total = math.fsum(p[0] for p in parts)
    total_sq = math.fsum(p[1] for p in parts)
    mean, se = _mean_se(total, total_sq, mc.samples)
    return MCEstimate(float(mean), float(se))


def mc_gradient(grad_g, W, b, mc: MCConfig, *, return_se: bool = False):
    """Pathwise estimates of ``E[grad g(Wz+b) z^T]`` and ``E[grad g(Wz+b)]``.

    These are the derivatives of the expectation term only; the caller adds
    ``2 lam W`` for the regularizer. With ``return_se`` the elementwise
    standard errors are returned as well.
    """
    W, b = _affine(W, b)
    k, d = W.shape

    def block(Z, start):
        G = np.asarray(grad_g(Z @ W.T + b), dtype=float).reshape(Z.shape[0], k)
        _check(G, start)
        outer = G[:, :, None] * Z[:, None, :]
        return G.sum(0), (G * G).sum(0), outer.sum(0), (outer * outer).sum(0)

    parts = _reduce_blocks(mc, d, block)
    sums = [sum(p[i] for p in parts) for i in range(4)]
    db, db_se = _mean_se(sums[0], sums[1], mc.samples)
    dW, dW_se = _mean_se(sums[2], sums[3], mc.samples)
    if return_se:
        return dW, db, dW_se, db_se
    return dW, db


def stein_residual(grad_g, hess_g, W, b, mc: MCConfig) -> float:
    """``|| E^[grad g(u) z^T] - E^[hess g(u)] W ||_F`` on one shared sample stream.

    Stein's lemma makes the population version exactly zero, so the returned
    statistic measures pure Monte Carlo error.
    """
    W, b = _affine(W, b)
    k, d = W.shape

    def block(Z, start):
        U = Z @ W.T + b
        G = np.asarray(grad_g(U), dtype=float).reshape(Z.shape[0], k)
        H = np.asarray(hess_g(U), dtype=float).reshape(Z.shape[0], k, k)
        _check(G, start)
        _check(H, start)
        return np.einsum("si,sj->ij", G, Z), H.sum(0)

    parts = _reduce_blocks(mc, d, block)
    first = sum(p[0] for p in parts) / mc.samples
    second = sum(p[1] for p in parts) / mc.samples
    return float(np.linalg.norm(first - second @ W))


@dataclass(frozen=True)
class SOSPBoundInput:
    rho: float
    lam: float
    K: float
    Delta: float | None = None

    def __post_init__(self):
        if not self.rho > 0 or not self.lam > 0 or self.K < 0:
            raise ValueError("need rho > 0, lam > 0, K >= 0")
        if not self.lam > math.sqrt(self.K * self.rho) / 2:
            raise ValueError(
                f"lam={self.lam} must exceed sqrt(K rho)/2={math.sqrt(self.K * self.rho) / 2}"
            )

    @classmethod
    def from_delta(cls, rho: float, K: float, Delta: float) -> "SOSPBoundInput":
        """Regularization ``lam = (sqrt(K rho) + Delta)/2``."""
        if not Delta > 0:
            raise ValueError("Delta must be positive")
        return cls(rho=rho, lam=(math.sqrt(K * rho) + Delta) / 2, K=K, Delta=Delta)


def sosp_w_bound(inp: SOSPBoundInput) -> float:
    """Frobenius bound on the mixing matrix ``W`` at any rho-SOSP."""
    return inp.rho / (2 * inp.lam - math.sqrt(inp.K * inp.rho))


def regularization_for(rho: float, K: float, Delta: float) -> float:
    return (math.sqrt(K * rho) + Delta) / 2


@dataclass
class GaussianReparam:
    """``A = mean + sigma * z`` elementwise, reshaped to ``shape``."""

    mean: np.ndarray
    sigma: np.ndarray
    shape: tuple[int, int]

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float).reshape(self.shape)
        self.sigma = np.asarray(self.sigma, dtype=float).reshape(self.shape)
        if np.any(self.sigma < 0):
            raise ValueError("sigma entries must be nonnegative")

    def sample(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        return self.mean + self.sigma * z.reshape(z.shape[:-2] + self.shape) if z.ndim > 2 \
            else self.mean + self.sigma * z.reshape(self.shape)


# ---------------------------------------------------------------------------
# sample-average objective over (W, b)
# ---------------------------------------------------------------------------


class ReparamObjective(SmoothObjective):
    """``mean_s g(W z_s + b) + lam ||W||_F^2`` on a fixed bank of draws.

    Fixing the bank makes the objective a deterministic function of
    ``(W, b)``; re-estimate with a larger ``MCConfig`` to certify the
    population objective.
    """

    def __init__(self, g, grad_g, hess_g, k: int, d: int, lam: float, mc: MCConfig,
                 *, L=None, K=None):
        self.g, self.grad_g, self.hess_g = g, grad_g, hess_g
        self.k, self.d, self.lam = k, d, lam
        self.mc = mc
        self.Z = gaussian_samples(d, mc)
        self.dim = k * d + k
        self.L, self.K = L, K
        self._tmpl = ParamVector.from_arrays([("W", np.zeros((k, d))), ("b", np.zeros(k))])

    def template(self):
        return self._tmpl

    def pack(self, W, b) -> ParamVector:
        return ParamVector.from_arrays([("W", W), ("b", b)])

    def _split(self, p):
        x = as_array(p)
        return x[: self.k * self.d].reshape(self.k, self.d), x[self.k * self.d:]

    def _points(self, W, b):
        return self.Z @ W.T + b

    def value(self, p):
        W, b = self._split(p)
        return float(np.mean(self.g(self._points(W, b))) + self.lam * np.sum(W * W))

    def value_se(self, p) -> float:
        W, b = self._split(p)
        v = self.g(self._points(W, b))
        return float(np.std(v, ddof=1) / math.sqrt(v.size))

    def gradient(self, p):
        W, b = self._split(p)
        G = self.grad_g(self._points(W, b))
        S = self.Z.shape[0]
        dW = G.T @ self.Z / S + 2 * self.lam * W
        db = G.mean(0)
        return np.concatenate([dW.ravel(), db])

    def gradient_se(self, p) -> np.ndarray:
        """Elementwise standard error of the gradient estimate."""
        W, b = self._split(p)
        G = self.grad_g(self._points(W, b))
        outer = (G[:, :, None] * self.Z[:, None, :]).reshape(G.shape[0], -1)
        full = np.hstack([outer, G])
        return full.std(0, ddof=1) / math.sqrt(G.shape[0])

    def hessian(self, p):
        W, b = self._split(p)
        H = self.hess_g(self._points(W, b))  # (S, k, k)
        Z = self.Z
        S = Z.shape[0]
        k, d = self.k, self.d
        hww = np.einsum("sil,sj,sm->ijlm", H, Z, Z).reshape(k * d, k * d) / S
        hwb = np.einsum("sil,sj->ijl", H, Z).reshape(k * d, k) / S
        hbb = H.mean(0)
        out = np.block([[hww + 2 * self.lam * np.eye(k * d), hwb], [hwb.T, hbb]])
        return 0.5 * (out + out.T)

    def hessian_block(self, p, block):
        return self.hessian(p)[block][:, block]

    @property
    def b_block(self) -> slice:
        return slice(self.k * self.d, self.dim)

    def resampled(self, mc: MCConfig) -> "ReparamObjective":
        return ReparamObjective(self.g, self.grad_g, self.hess_g, self.k, self.d, self.lam, mc,
                                L=self.L, K=self.K)


# Convex testbed g(u) = sum_i cosh(u_i) with a closed-form expectation.


def cosh_sum(U):
    return np.cosh(U).sum(-1)


def cosh_sum_grad(U):
    return np.sinh(U)


def cosh_sum_hess(U):
    U = np.asarray(U)
    out = np.zeros(U.shape + (U.shape[-1],))
    idx = np.arange(U.shape[-1])
    out[..., idx, idx] = np.cosh(U)
    return out


def cosh_sum_expectation(W, b) -> float:
    """``E sum_i cosh(w_i . z + b_i) = sum_i cosh(b_i) exp(|w_i|^2 / 2)``."""
    W, b = _affine(W, b)
    return float(np.sum(np.cosh(b) * np.exp(0.5 * np.sum(W * W, axis=1))))


def cosh_hessian_lipschitz(radius: float) -> float:
    """Hessian-Lipschitz constant of ``sum cosh`` on the box ``|u_i| <= radius`` (grid bound)."""
    grid = np.linspace(-radius, radius, 20001)
    return float(np.max(np.abs(np.sinh(grid))))
