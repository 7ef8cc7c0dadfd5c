"""Second-order stationary point seeking optimizers and certification.

Two drivers are provided:

* :func:`pgd_minimize` -- gradient descent that injects isotropic Gaussian
  noise whenever the gradient becomes small, so strict saddles are left.
* :func:`hessian_descent` -- deterministic; alternates gradient steps with a
  fixed-length step along the most negative curvature direction and stops
  at a certified point.

:func:`check_sosp` certifies a point independently of how it was produced.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .errors import CapabilityError, NumericalAbort
from .objective import SmoothObjective
from .params import ParamVector, as_array

DENSE_EIG_MAX_DIM = 2000


@dataclass(frozen=True)
class SOSPReport:
    grad_norm: float
    lambda_min: float
    rho: float
    K: float
    first_order_ok: bool
    second_order_ok: bool
    exhausted: bool = False
    iterations: int = 0

    @property
    def threshold(self) -> float:
        """Smallest admissible Hessian eigenvalue, ``-sqrt(K rho)``."""
        return -math.sqrt(self.K * self.rho)

    @property
    def certified(self) -> bool:
        return self.first_order_ok and self.second_order_ok and not self.exhausted


def make_report(grad_norm, lambda_min, rho, K, *, exhausted=False, iterations=0) -> SOSPReport:
    if rho <= 0:
        raise ValueError("rho must be positive")
    if K < 0:
        raise ValueError("K must be nonnegative")
    grad_norm = float(grad_norm)
    lambda_min = float(lambda_min)
    return SOSPReport(
        grad_norm=grad_norm,
        lambda_min=lambda_min,
        rho=float(rho),
        K=float(K),
        first_order_ok=grad_norm <= rho,
        second_order_ok=lambda_min >= -math.sqrt(K * rho),
        exhausted=exhausted,
        iterations=iterations,
    )


@dataclass(frozen=True)
class PGDConfig:
    """Perturbed gradient descent settings.

    ``eta=None`` means ``1/L`` from the objective. A perturbation fires when
    the gradient norm is below ``perturb_threshold`` and at least
    ``perturb_cooldown`` iterations have passed since the previous one.
    """

    T: int
    eta: float | None = None
    perturb_threshold: float = 1e-6
    perturb_scale: float = 0.005
    perturb_cooldown: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.T < 1:
            raise ValueError("T must be a positive integer")
        if self.eta is not None and not self.eta > 0:
            raise ValueError("eta must be positive")
        if not self.perturb_threshold > 0 or not self.perturb_scale > 0:
            raise ValueError("perturbation threshold and scale must be positive")
        if self.perturb_cooldown < 0:
            raise ValueError("perturb_cooldown must be nonnegative")


@dataclass(frozen=True)
class HDConfig:
    """Hessian descent settings; ``nu`` defaults to ``1/L``, ``h`` to ``3 sqrt(rho)/K``."""

    rho: float
    K: float
    max_iters: int = 10_000
    nu: float | None = None
    h: float | None = None

    def __post_init__(self):
        for name in ("rho", "K"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be a positive integer")
        for name in ("nu", "h"):
            val = getattr(self, name)
            if val is not None and not val > 0:
                raise ValueError(f"{name} must be positive")

    @property
    def step_h(self) -> float:
        return self.h if self.h is not None else 3.0 * math.sqrt(self.rho) / self.K


class TrajectoryRow(NamedTuple):
    iter: int
    value: float
    grad_norm: float
    event: str


def write_trajectory_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iter", "value", "grad_norm", "event"])
        for r in rows:
            writer.writerow([r.iter, repr(float(r.value)), repr(float(r.grad_norm)), r.event])


def read_trajectory_csv(path) -> list[TrajectoryRow]:
    with open(path, newline="") as fh:
        return [
            TrajectoryRow(int(r["iter"]), float(r["value"]), float(r["grad_norm"]), r["event"])
            for r in csv.DictReader(fh)
        ]


# ---------------------------------------------------------------------------
# eigenvalues
# ---------------------------------------------------------------------------


def min_eig(H) -> tuple[float, np.ndarray]:
    """Smallest eigenvalue of a symmetric matrix and a unit eigenvector."""
    H = np.atleast_2d(np.asarray(H, dtype=float))
    if H.shape[0] != H.shape[1]:
        raise ValueError(f"matrix must be square, got {H.shape}")
    scale = max(1.0, float(np.max(np.abs(H))) if H.size else 1.0)
    asym = float(np.max(np.abs(H - H.T))) if H.size else 0.0
    if asym > 1e-10 * scale:
        raise ValueError(f"matrix is not symmetric (max asymmetry {asym:.3e})")
    w, V = np.linalg.eigh(0.5 * (H + H.T))
    return float(w[0]), V[:, 0].copy()


def min_eig_hvp(
    hvp: Callable[[np.ndarray], np.ndarray],
    dim: int,
    *,
    max_iters: int = 5000,
    tol: float = 1e-12,
    norm_iters: int = 50,
    seed: int = 0,
) -> tuple[float, np.ndarray]:
    """Smallest eigenvalue from Hessian-vector products by shifted power iteration.

    A bound ``c >= ||H||`` comes from a short power iteration on ``H``; the
    dominant eigenpair of ``c I - H`` then gives ``lambda_min = c - mu``.
    """
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(dim)
    v /= np.linalg.norm(v)
    norm_est = 0.0
    for _ in range(norm_iters):
        w = hvp(v)
        nw = float(np.linalg.norm(w))
        if nw == 0.0:
            break
        norm_est = nw
        v = w / nw
    shift = 1.5 * norm_est + 1e-12
    v = rng.standard_normal(dim)
    v /= np.linalg.norm(v)
    mu_old = np.inf
    for _ in range(max_iters):
        w = shift * v - hvp(v)
        mu = float(v @ w)
        nw = float(np.linalg.norm(w))
        if nw == 0.0:
            break
        v = w / nw
        if abs(mu - mu_old) <= tol * shift:
            break
        mu_old = mu
    lam = float(v @ hvp(v))
    return lam, v


# ---------------------------------------------------------------------------
# certification
# ---------------------------------------------------------------------------


def _block_hessian(obj, x, block):
    if hasattr(obj, "hessian_block"):
        try:
            return obj.hessian_block(x, block)
        except NotImplementedError:
            pass
    return obj.hessian(x)[block][:, block]


def check_sosp(obj: SmoothObjective, p, rho: float, K: float, *, block=None) -> SOSPReport:
    """Test the approximate second-order stationarity conditions at ``p``.

    ``block`` (a slice or index array) restricts the curvature test to a
    principal sub-block of the Hessian; the gradient norm is always the full one.
    """
    x = as_array(p)
    g = obj.gradient(x)
    if not np.all(np.isfinite(g)):
        raise NumericalAbort("non-finite gradient at the checked point")
    if block is not None:
        if not (obj.has_hessian or hasattr(obj, "hessian_block")):
            raise CapabilityError("block certification needs Hessian access")
        lam, _ = min_eig(_block_hessian(obj, x, block))
    elif obj.has_hessian and obj.dim <= DENSE_EIG_MAX_DIM:
        lam, _ = min_eig(obj.hessian(x))
    elif obj.has_hvp:
        lam, _ = min_eig_hvp(lambda v: obj.hvp(x, v), obj.dim)
    else:
        raise CapabilityError("objective exposes neither a Hessian nor Hessian-vector products")
    return make_report(np.linalg.norm(g), lam, rho, K)


# ---------------------------------------------------------------------------
# optimizers
# ---------------------------------------------------------------------------


def _evaluate(obj, x, t):
    f, g = obj.value_and_gradient(x)
    if not np.isfinite(f) or not np.all(np.isfinite(g)):
        raise NumericalAbort(f"non-finite value or gradient at iterate {t}", index=t)
    return float(f), g


def _wrap(init, x):
    if isinstance(init, ParamVector):
        return init.with_data(x)
    return ParamVector.flat(x)


def _resolve_eta(obj, eta):
    if eta is None:
        if not obj.L:
            raise ValueError("eta not given and objective declares no L")
        return 1.0 / obj.L
    if obj.L is not None and eta * obj.L > 1 + 1e-12:
        raise ValueError(f"eta={eta} exceeds 1/L={1.0 / obj.L}")
    return eta


def pgd_minimize(
    obj: SmoothObjective,
    init,
    cfg: PGDConfig,
    *,
    callback: Callable[[int, np.ndarray], None] | None = None,
) -> tuple[ParamVector, list[TrajectoryRow]]:
    """Run ``cfg.T`` perturbed gradient steps from ``init``.

    Each trajectory row holds the value and gradient norm at the point the
    step was taken from (after any perturbation). A final ``done`` row
    describes the returned point. ``callback(t, x)`` sees every iterate
    before its step.
    """
    eta = _resolve_eta(obj, cfg.eta)
    x = as_array(init).copy()
    rng = np.random.default_rng(cfg.seed)
    rows: list[TrajectoryRow] = []
    last_perturb = None
    for t in range(cfg.T):
        f, g = _evaluate(obj, x, t)
        gn = float(np.linalg.norm(g))
        event = "step"
        cooled = last_perturb is None or t - last_perturb >= cfg.perturb_cooldown
        if gn < cfg.perturb_threshold and cooled:
            x = x + cfg.perturb_scale * rng.standard_normal(x.size)
            f, g = _evaluate(obj, x, t)
            gn = float(np.linalg.norm(g))
            last_perturb = t
            event = "perturb"
        rows.append(TrajectoryRow(t, f, gn, event))
        if callback is not None:
            callback(t, x)
        x = x - eta * g
    f, g = _evaluate(obj, x, cfg.T)
    rows.append(TrajectoryRow(cfg.T, f, float(np.linalg.norm(g)), "done"))
    return _wrap(init, x), rows


def hessian_descent(
    obj: SmoothObjective,
    init,
    cfg: HDConfig,
    *,
    trajectory: list | None = None,
) -> tuple[ParamVector, SOSPReport]:
    """Deterministic SOSP search using full Hessians.

    Negative-curvature steps try both signs of the eigenvector and keep the
    lower objective. If ``max_iters`` runs out, the lowest-valued iterate is
    returned with ``report.exhausted`` set. Pass a list as ``trajectory`` to
    collect :class:`TrajectoryRow` records.
    """
    if not obj.has_hessian:
        raise CapabilityError("hessian_descent needs a full Hessian")
    nu = cfg.nu if cfg.nu is not None else _resolve_eta(obj, None)
    h = cfg.step_h
    threshold = -math.sqrt(cfg.K * cfg.rho)
    rows = trajectory if trajectory is not None else []
    x = as_array(init).copy()
    best_f, best_x = np.inf, x.copy()
    for t in range(cfg.max_iters):
        f, g = _evaluate(obj, x, t)
        gn = float(np.linalg.norm(g))
        if f < best_f:
            best_f, best_x = f, x.copy()
        if gn > cfg.rho:
            rows.append(TrajectoryRow(t, f, gn, "step"))
            x = x - nu * g
            continue
        lam, u = min_eig(obj.hessian(x))
        if lam < threshold:
            rows.append(TrajectoryRow(t, f, gn, "eig_step"))
            plus, minus = x + h * u, x - h * u
            f_plus, _ = _evaluate(obj, plus, t)
            f_minus, _ = _evaluate(obj, minus, t)
            x = plus if f_plus <= f_minus else minus
            continue
        rows.append(TrajectoryRow(t, f, gn, "done"))
        return _wrap(init, x), make_report(gn, lam, cfg.rho, cfg.K, iterations=t)
    f, g = _evaluate(obj, x, cfg.max_iters)
    if f < best_f:
        best_f, best_x = f, x.copy()
    rep = check_sosp(obj, best_x, cfg.rho, cfg.K)
    rows.append(TrajectoryRow(cfg.max_iters, best_f, rep.grad_norm, "done"))
    report = make_report(
        rep.grad_norm, rep.lambda_min, cfg.rho, cfg.K, exhausted=True, iterations=cfg.max_iters
    )
    return _wrap(init, best_x), report
