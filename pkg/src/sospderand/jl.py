"""Learned deterministic Johnson-Lindenstrauss projections.

A Gaussian matrix ``A = M + sigma * Z`` is trained so that the smoothed
probability of any point exceeding distortion ``eps`` falls, while a
penalty on ``sigma`` removes the randomness. Distortion is measured as
``|(1/k) ||A x||^2 - 1|`` for unit ``x``, so a good deterministic ``M`` has
entries of order ``1/sqrt(k)`` times the scale of ``N(0, 1)`` draws.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import NumericalAbort
from .objective import SmoothObjective
from .optim import PGDConfig, pgd_minimize
from .params import ParamVector, as_array
from .reparam import MCConfig, gaussian_samples
from .smoothing import jl_indicator_smooth, jl_indicator_smooth_d1

# ---------------------------------------------------------------------------
# data and distortion
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class JLDataset:
    """Points as rows of ``X``; rows are normalized to unit length on construction."""

    X: np.ndarray

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        norms = np.linalg.norm(X, axis=1, keepdims=True)
        if np.any(norms == 0):
            raise ValueError("dataset contains a zero row")
        object.__setattr__(self, "X", X / norms)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]


def random_dataset(n: int, d: int, seed: int = 0) -> JLDataset:
    return JLDataset(np.random.default_rng(seed).standard_normal((n, d)))


def read_dataset(path) -> JLDataset:
    return JLDataset(np.loadtxt(path, ndmin=2))


def write_matrix(A, path) -> None:
    np.savetxt(path, np.atleast_2d(A), fmt="%.17g")


@dataclass
class ProjDistribution:
    M: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        self.M = np.atleast_2d(np.asarray(self.M, dtype=float))
        self.sigma = np.asarray(self.sigma, dtype=float).reshape(self.M.shape)
        if np.any(self.sigma < 0):
            raise ValueError("sigma entries must be nonnegative")

    @classmethod
    def initial(cls, k: int, d: int) -> "ProjDistribution":
        """``M = 0`` and unit standard deviations."""
        return cls(np.zeros((k, d)), np.ones((k, d)))

    @property
    def k(self) -> int:
        return self.M.shape[0]

    def sample(self, rng) -> np.ndarray:
        return self.M + self.sigma * rng.standard_normal(self.M.shape)


def distortion(A, x) -> float:
    """``|(1/k) ||A x||^2 - 1|`` for a unit vector ``x``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    x = np.asarray(x, dtype=float)
    if abs(np.linalg.norm(x) - 1.0) > 1e-8:
        raise ValueError("x must have unit norm")
    y = A @ x
    return float(abs(y @ y / A.shape[0] - 1.0))


def distortions(A, X) -> np.ndarray:
    """Per-row distortions of ``X``; rows are assumed unit norm."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    Y = np.asarray(X) @ A.T
    return np.abs(np.sum(Y * Y, axis=-1) / A.shape[0] - 1.0)


class DistortionReport(NamedTuple):
    per_point: np.ndarray
    max: float

    def violations(self, eps: float) -> int:
        return int(np.sum(self.per_point > eps))


def distortion_report(A, ds: JLDataset) -> DistortionReport:
    per = distortions(A, ds.X)
    return DistortionReport(per, float(per.max()))


class Baseline(NamedTuple):
    mean_maxdist: float
    min_maxdist: float


def random_gaussian_baseline(ds: JLDataset, k: int, trials: int, seed: int = 0) -> Baseline:
    """Max distortion of ``trials`` i.i.d. ``N(0, 1)`` matrices; mean and min over trials."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    worst = np.array([distortions(rng.standard_normal((k, ds.d)), ds.X).max()
                      for _ in range(trials)])
    return Baseline(float(worst.mean()), float(worst.min()))


def jl_guarantee_check(M, ds: JLDataset, eps: float) -> tuple[bool, DistortionReport]:
    rep = distortion_report(M, ds)
    return rep.max <= eps, rep


class ExcessBound(NamedTuple):
    """Threshold degradation from using the mean ``M`` in place of random draws.

    The upper side is additive. The lower side is ``lower`` plus a
    multiplicative factor ``lower_factor`` on ``1 - eps``.
    """

    upper: float
    lower: float
    lower_factor: float


def extract_deterministic(pd: ProjDistribution, eps: float) -> tuple[np.ndarray, ExcessBound]:
    """Return ``M`` with the distortion-threshold excess implied by ``sigma_max``."""
    smax = float(pd.sigma.max()) if pd.sigma.size else 0.0
    k = pd.k
    upper = 2 * math.sqrt(2) * smax / k * math.sqrt(1 + eps) + 2 * smax**2
    return pd.M.copy(), ExcessBound(upper, smax**2, 0.5)


# ---------------------------------------------------------------------------
# smoothed objective
# ---------------------------------------------------------------------------


class JLObjective(SmoothObjective):
    """``sum_i mean_s I~(dist(M + sigma * Z_s, x_i)) + reg * ||sigma||_F^2``.

    Parameters are packed as ``(sigma, M)``. The draws ``Z_s`` are a fixed
    bank from ``mc``. ``reg`` defaults to ``lambda_scale / (2 k d)``.
    """

    def __init__(self, ds: JLDataset, k: int, eps: float, eps1: float, mc: MCConfig,
                 *, lambda_scale: float = 1.0, reg: float | None = None):
        if not (eps > 0 and eps1 > 0):
            raise ValueError("eps and eps1 must be positive")
        self.ds, self.k, self.d = ds, k, ds.d
        self.eps, self.eps1 = eps, eps1
        self.reg = lambda_scale / (2 * k * ds.d) if reg is None else reg
        self.Z = gaussian_samples(k * ds.d, mc).reshape(mc.samples, k, ds.d)
        self.dim = 2 * k * ds.d
        self.L = None
        self.K = None

    def pack(self, pd: ProjDistribution) -> ParamVector:
        return ParamVector.from_arrays([("sigma", pd.sigma), ("M", pd.M)])

    def template(self):
        return self.pack(ProjDistribution.initial(self.k, self.d))

    def _split(self, p):
        x = as_array(p)
        kd = self.k * self.d
        return x[:kd].reshape(self.k, self.d), x[kd:].reshape(self.k, self.d)

    def _terms(self, sigma, M, X):
        A = M + sigma * self.Z
        Y = np.einsum("skd,nd->snk", A, X)
        q = np.sum(Y * Y, axis=-1) / self.k - 1.0
        return Y, q

    def value(self, p):
        sigma, M = self._split(p)
        _, q = self._terms(sigma, M, self.ds.X)
        ind = jl_indicator_smooth(np.abs(q), self.eps, self.eps1)
        return float(ind.mean(0).sum() + self.reg * np.sum(sigma * sigma))

    def gradient(self, p):
        sigma, M = self._split(p)
        gs, gM = _jl_grad(self.Z, sigma, M, self.ds.X, self.k, self.eps, self.eps1)
        return np.concatenate([(gs + 2 * self.reg * sigma).ravel(), gM.ravel()])

    def violation_frequencies(self, p):
        """Per-sample exact and smoothed violation statistics on the bank.

        Returns ``(any_violation, per_point_violation, smoothed, band)`` with
        shapes ``(S,)``, ``(S, n)``, ``(S, n)``, ``(S, n)``.
        """
        sigma, M = self._split(p)
        _, q = self._terms(sigma, M, self.ds.X)
        t = np.abs(q)
        per = t > self.eps
        band = (t > self.eps) & (t < self.eps + self.eps1)
        return per.any(1), per, jl_indicator_smooth(t, self.eps, self.eps1), band


def _jl_grad(Z, sigma, M, X, k, eps, eps1):
    """Gradients of ``sum_i mean_s I~`` with respect to ``sigma`` and ``M``."""
    A = M + sigma * Z
    Y = np.einsum("skd,nd->snk", A, X)
    q = np.sum(Y * Y, axis=-1) / k - 1.0
    w = jl_indicator_smooth_d1(np.abs(q), eps, eps1) * np.sign(q) * (2.0 / k)
    GA = np.einsum("sn,snk,nd->skd", w, Y, X) / Z.shape[0]
    return (GA * Z).sum(0), GA.sum(0)


def jl_objective(pd: ProjDistribution, ds: JLDataset, eps: float, eps1: float,
                 lambda_scale: float = 1.0, mc: MCConfig = MCConfig(64)) -> JLObjective:
    """Objective over ``(sigma, M)``; evaluate it at ``obj.pack(pd)``."""
    return JLObjective(ds, pd.k, eps, eps1, mc, lambda_scale=lambda_scale)


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class JLConfig:
    """Training settings; ``optimizer`` is ``"adam"`` or ``"pgd"``.

    The PGD variant runs :func:`pgd_minimize` on a fixed-bank objective over
    the full dataset with penalty ``(sqrt(rho/eps1^3) + Delta)/2 ||sigma||^2``
    and step ``lr``.
    """

    T: int = 5000
    batch: int = 20
    lr: float = 0.01
    early_stop: float = 0.01
    eps: float = 0.02
    eps1: float = 1.0
    samples: int = 4
    lambda_scale: float = 1.0
    seed: int = 0
    optimizer: str = "adam"
    rho: float = 1e-4
    Delta: float = 0.1
    log_every: int = 1

    def __post_init__(self):
        if self.T < 1 or self.batch < 1 or self.samples < 1 or self.log_every < 1:
            raise ValueError("T, batch, samples and log_every must be positive")
        for name in ("lr", "eps", "eps1", "lambda_scale"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.optimizer not in ("adam", "pgd"):
            raise ValueError("optimizer must be 'adam' or 'pgd'")


class JLRow(NamedTuple):
    iter: int
    distortion: float
    max_sigma2: float


class LearnResult(NamedTuple):
    M: np.ndarray
    trajectory: list
    pd: ProjDistribution


def _adam(params, grads, state, t, lr, b1=0.9, b2=0.999, tiny=1e-8):
    out = []
    for i, (p, g) in enumerate(zip(params, grads)):
        m, v = state[i]
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        state[i] = (m, v)
        out.append(p - lr * (m / (1 - b1**t)) / (np.sqrt(v / (1 - b2**t)) + tiny))
    return out


def learn_projection(ds: JLDataset, k: int, cfg: JLConfig = JLConfig()) -> LearnResult:
    """Train ``(M, sigma)`` from ``M = 0``, ``sigma = 1``; return the mean matrix.

    Each logged row holds the max distortion of one draw from the current
    distribution and the largest variance. Training stops early once that
    sampled distortion is below ``cfg.early_stop``.
    """
    if k < 1:
        raise ValueError("k must be positive")
    if cfg.optimizer == "pgd":
        return _learn_pgd(ds, k, cfg)
    rng = np.random.default_rng(cfg.seed)
    kd_shape = (k, ds.d)
    M = np.zeros(kd_shape)
    theta = np.ones(kd_shape)
    reg = cfg.lambda_scale / (2 * k * ds.d)
    state = [(np.zeros(kd_shape), np.zeros(kd_shape)) for _ in range(2)]
    batch = min(cfg.batch, ds.n)
    rows = []
    for t in range(1, cfg.T + 1):
        idx = rng.choice(ds.n, batch, replace=False)
        sigma = np.abs(theta)
        Z = rng.standard_normal((cfg.samples,) + kd_shape)
        gs, gM = _jl_grad(Z, sigma, M, ds.X[idx], k, cfg.eps, cfg.eps1)
        g_theta = (gs + 2 * reg * sigma) * np.sign(theta)
        if not (np.all(np.isfinite(gM)) and np.all(np.isfinite(g_theta))):
            raise NumericalAbort(f"non-finite gradient at iterate {t}", index=t)
        M, theta = _adam([M, theta], [gM, g_theta], state, t, cfg.lr)
        sigma = np.abs(theta)
        dist = float(distortions(M + sigma * rng.standard_normal(kd_shape), ds.X).max())
        stop = dist < cfg.early_stop
        if t % cfg.log_every == 0 or stop or t == cfg.T:
            rows.append(JLRow(t, dist, float(np.max(sigma**2))))
        if stop:
            break
    return LearnResult(M, rows, ProjDistribution(M, np.abs(theta)))


def _learn_pgd(ds, k, cfg):
    lam = (math.sqrt(cfg.rho / cfg.eps1**3) + cfg.Delta) / 2
    obj = JLObjective(ds, k, cfg.eps, cfg.eps1, MCConfig(cfg.samples, cfg.seed), reg=lam)
    init = obj.template()
    rng = np.random.default_rng([cfg.seed, 1])
    kd = k * ds.d
    rows = []

    def log(t, x):
        if t % cfg.log_every == 0:
            sigma, M = x[:kd].reshape(k, ds.d), x[kd:].reshape(k, ds.d)
            A = M + sigma * rng.standard_normal((k, ds.d))
            rows.append(JLRow(t, float(distortions(A, ds.X).max()), float(np.max(sigma**2))))

    p, _ = pgd_minimize(obj, init, PGDConfig(T=cfg.T, eta=cfg.lr, seed=cfg.seed), callback=log)
    sigma, M = obj._split(p)
    pd = ProjDistribution(M.copy(), np.abs(sigma))
    return LearnResult(pd.M, rows, pd)


def write_jl_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iter", "distortion", "max_sigma2"])
        for r in rows:
            w.writerow([r.iter, repr(r.distortion), repr(r.max_sigma2)])
