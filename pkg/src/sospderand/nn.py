"""Teacher-student structure discovery and the one-dimensional bias toy.

The student is a two-layer network ``y = a^T act(W x + b)`` trained on
squared error plus ``lam ||W||_F^2``. Inputs are standard Gaussian, the
teacher depends on ``x`` only through ``U x``, and the quantity of interest
is the part of ``W`` orthogonal to the row span of ``U``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple

import numpy as np
from scipy.optimize import minimize
from scipy.special import ndtr

from .errors import PrecisionError
from .finite_diff import estimate_gradient_lipschitz, estimate_hessian_lipschitz
from .objective import SmoothObjective
from .optim import PGDConfig, pgd_minimize
from .params import ParamVector, as_array
from .reparam import MCConfig, gaussian_samples
from .smoothing import SmoothRelu

# ---------------------------------------------------------------------------
# teacher, student, decomposition
# ---------------------------------------------------------------------------


def _first_tanh(Z):
    return np.tanh(Z[:, 0])


@dataclass(frozen=True)
class TeacherModel:
    """``y = link(x U^T) + noise_std * N(0, 1)``; ``link`` maps ``(n, k)`` to ``n``."""

    U: np.ndarray
    link: Callable[[np.ndarray], np.ndarray] = _first_tanh
    noise_std: float = 0.1
    seed: int = 0

    def __post_init__(self):
        U = np.atleast_2d(np.asarray(self.U, dtype=float))
        if U.shape[0] > U.shape[1] or np.linalg.matrix_rank(U) < U.shape[0]:
            raise ValueError("teacher directions must be linearly independent")
        if self.noise_std < 0:
            raise ValueError("noise_std must be nonnegative")
        object.__setattr__(self, "U", U)

    @property
    def d(self) -> int:
        return self.U.shape[1]

    @property
    def k(self) -> int:
        return self.U.shape[0]

    def clean(self, X) -> np.ndarray:
        return np.asarray(self.link(np.asarray(X) @ self.U.T), dtype=float)

    def labels(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        noise = np.random.default_rng(self.seed).standard_normal(X.shape[0])
        return self.clean(X) + self.noise_std * noise


def single_index_teacher(theta, *, noise_std=0.1, seed=0) -> TeacherModel:
    """``y = tanh(theta . x) + noise``."""
    return TeacherModel(np.asarray(theta, dtype=float)[None, :], _first_tanh, noise_std, seed)


def tanh_act():
    """tanh with the derivative interface of :class:`SmoothRelu`."""
    return _Tanh()


class _Tanh:
    def __call__(self, x):
        return np.tanh(x)

    def d1(self, x):
        return 1.0 - np.tanh(x) ** 2

    def d2(self, x):
        t = np.tanh(x)
        return -2.0 * t * (1.0 - t * t)

    def value_d1(self, x):
        t = np.tanh(x)
        return t, 1.0 - t * t


@dataclass
class StudentNet:
    W: np.ndarray
    b: np.ndarray
    a: np.ndarray
    activation: object = field(default_factory=lambda: SmoothRelu(2.0))
    a_trainable: bool = False

    def __post_init__(self):
        self.W = np.atleast_2d(np.asarray(self.W, dtype=float))
        self.b = np.asarray(self.b, dtype=float).ravel()
        self.a = np.asarray(self.a, dtype=float).ravel()
        h = self.W.shape[0]
        if h < 1:
            raise ValueError("student needs at least one hidden unit")
        if self.b.shape != (h,) or self.a.shape != (h,):
            raise ValueError(f"b and a must have length {h}")

    @property
    def h(self) -> int:
        return self.W.shape[0]

    @property
    def d(self) -> int:
        return self.W.shape[1]

    def forward(self, X) -> np.ndarray:
        return self.activation(np.asarray(X) @ self.W.T + self.b) @ self.a

    def params(self) -> ParamVector:
        items = [("W", self.W), ("b", self.b)]
        if self.a_trainable:
            items.append(("a", self.a))
        return ParamVector.from_arrays(items)

    def with_params(self, p) -> "StudentNet":
        x = as_array(p)
        h, d = self.W.shape
        a = x[h * d + h:] if self.a_trainable else self.a
        return replace(self, W=x[: h * d].reshape(h, d).copy(), b=x[h * d: h * d + h].copy(),
                       a=np.array(a, copy=True))


def init_student(d: int, h: int, *, seed: int = 0, activation=None,
                 a_trainable: bool = False) -> StudentNet:
    """``W ~ N(0, 1/d)`` entrywise; ``b``, ``a ~ N(0, 1/h^2)``."""
    if h < 1 or d < 1:
        raise ValueError("h and d must be positive")
    rng = np.random.default_rng(seed)
    W = rng.normal(0.0, math.sqrt(1.0 / d), (h, d))
    b = rng.normal(0.0, 1.0 / h, h)
    a = rng.normal(0.0, 1.0 / h, h)
    return StudentNet(W, b, a, activation or SmoothRelu(2.0), a_trainable)


@dataclass(frozen=True)
class Decomposition:
    basis: np.ndarray

    @classmethod
    def from_directions(cls, U) -> "Decomposition":
        U = np.atleast_2d(np.asarray(U, dtype=float))
        Q, R = np.linalg.qr(U.T)
        diag = np.abs(np.diag(R))
        if diag.size == 0 or diag.min() <= 1e-12 * max(1.0, diag.max()):
            raise ValueError("teacher directions are rank deficient")
        return cls(Q.T.copy())

    @property
    def projector(self) -> np.ndarray:
        return self.basis.T @ self.basis

    def project_par(self, W) -> np.ndarray:
        return (np.asarray(W) @ self.basis.T) @ self.basis

    def project_perp(self, W) -> np.ndarray:
        W = np.asarray(W, dtype=float)
        return W - self.project_par(W)


def decompose(W, teacher: TeacherModel) -> tuple[np.ndarray, np.ndarray]:
    dec = Decomposition.from_directions(teacher.U)
    return dec.project_par(W), dec.project_perp(W)


# ---------------------------------------------------------------------------
# regularized risk
# ---------------------------------------------------------------------------


class StudentRisk(SmoothObjective):
    """``mean_s (y_s - a^T act(W x_s + b))^2 + lam ||W||_F^2`` on fixed data.

    Parameters are ``(W, b)`` or ``(W, b, a)`` when the student's second
    layer is trainable.
    """

    def __init__(self, student: StudentNet, X, y, lam: float):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        y = np.asarray(y, dtype=float).ravel()
        if X.shape[1] != student.d or X.shape[0] != y.size:
            raise ValueError(f"data shapes {X.shape}, {y.shape} do not fit student d={student.d}")
        if lam < 0:
            raise ValueError("lam must be nonnegative")
        self.student = student
        self.X, self.y, self.lam = X, y, float(lam)
        self.h, self.d = student.h, student.d
        self._tmpl = student.params()
        self.dim = self._tmpl.dim
        self.L = None
        self.K = None

    def template(self):
        return self._tmpl

    @property
    def b_block(self) -> slice:
        return slice(self.h * self.d, self.h * self.d + self.h)

    def _split(self, p):
        x = as_array(p)
        h, d = self.h, self.d
        W = x[: h * d].reshape(h, d)
        b = x[h * d: h * d + h]
        a = x[h * d + h:] if self.student.a_trainable else self.student.a
        return W, b, a

    def _residual(self, U, a):
        return self.student.activation(U) @ a - self.y

    def value(self, p):
        W, b, a = self._split(p)
        r = self._residual(self.X @ W.T + b, a)
        return float(np.mean(r * r) + self.lam * np.sum(W * W))

    def value_and_gradient(self, p):
        W, b, a = self._split(p)
        act = self.student.activation
        U = self.X @ W.T + b
        if hasattr(act, "value_d1"):
            S, D = act.value_d1(U)
        else:
            S, D = act(U), act.d1(U)
        r = S @ a - self.y
        n = self.X.shape[0]
        G = (2.0 / n) * r[:, None] * a[None, :] * D
        parts = [(G.T @ self.X + 2 * self.lam * W).ravel(), G.sum(0)]
        if self.student.a_trainable:
            parts.append((2.0 / n) * S.T @ r)
        return float(np.mean(r * r) + self.lam * np.sum(W * W)), np.concatenate(parts)

    def gradient(self, p):
        return self.value_and_gradient(p)[1]

    def hessian_b(self, p) -> np.ndarray:
        """Hessian with respect to the bias vector."""
        W, b, a = self._split(p)
        act = self.student.activation
        U = self.X @ W.T + b
        r = self._residual(U, a)
        n = self.X.shape[0]
        J = act.d1(U) * a
        H = (2.0 / n) * J.T @ J
        H[np.diag_indices_from(H)] += (2.0 / n) * (r[:, None] * a * act.d2(U)).sum(0)
        return 0.5 * (H + H.T)

    def hessian_block(self, p, block):
        if block == self.b_block or (
            isinstance(block, slice) and block.indices(self.dim) == self.b_block.indices(self.dim)
        ):
            return self.hessian_b(p)
        raise NotImplementedError("only the bias block has an analytic Hessian")

    def value_decoupled(self, p, dec: Decomposition) -> float:
        """The same risk evaluated through ``W_par x_par + W_perp x_perp + b``."""
        W, b, a = self._split(p)
        P = dec.projector
        Xpar = self.X @ P
        Xperp = self.X - Xpar
        Wpar = dec.project_par(W)
        Wperp = W - Wpar
        U = Xpar @ Wpar.T + Xperp @ Wperp.T + b
        r = self._residual(U, a)
        return float(np.mean(r * r) + self.lam * (np.sum(Wpar**2) + np.sum(Wperp**2)))


def gaussian_data(teacher: TeacherModel, mc: MCConfig):
    """Standard-normal inputs from ``mc`` and noisy teacher labels."""
    X = gaussian_samples(teacher.d, mc)
    return X, teacher.labels(X)


def regularized_risk(student: StudentNet, teacher: TeacherModel, lam: float, data) -> StudentRisk:
    """Risk objective on Gaussian inputs (``data`` an :class:`MCConfig`) or a given ``(X, y)``."""
    if student.d != teacher.d:
        raise ValueError(f"student d={student.d} but teacher d={teacher.d}")
    X, y = gaussian_data(teacher, data) if isinstance(data, MCConfig) else data
    return StudentRisk(student, X, y, lam)


def estimate_student_K(risk: StudentRisk, p, *, probes=10, radius=1e-2, seed=0) -> float:
    """Sampled Lipschitz constant of the bias Hessian, with safety factor 3."""
    return estimate_hessian_lipschitz(risk.hessian_b, p, probes=probes, radius=radius,
                                      safety=3.0, seed=seed)


class PerpRow(NamedTuple):
    iter: int
    perp_norm: float
    total_norm: float
    risk: float


def train_student(
    teacher: TeacherModel,
    student_init: StudentNet,
    pgd: PGDConfig,
    lam: float,
    data,
    *,
    decoupling_log: list | None = None,
    decoupling_every: int = 1,
) -> tuple[StudentNet, list[PerpRow]]:
    """Perturbed gradient descent on the student risk, tracking ``||W_perp||_F``.

    With ``pgd.eta=None`` the step is ``1/L`` for ``L`` the largest Hessian
    eigenvalue magnitude at initialization. Pass a list as
    ``decoupling_log`` to record the direct-vs-decoupled risk gap every
    ``decoupling_every`` steps.
    """
    risk = regularized_risk(student_init, teacher, lam, data)
    dec = Decomposition.from_directions(teacher.U)
    p0 = student_init.params()
    if pgd.eta is None:
        risk.L = abs(estimate_gradient_lipschitz(risk, p0))
    hd = risk.h * risk.d
    norms = []

    def record(t, x):
        W = x[:hd].reshape(risk.h, risk.d)
        norms.append((float(np.linalg.norm(dec.project_perp(W))), float(np.linalg.norm(W))))
        if decoupling_log is not None and t % decoupling_every == 0:
            decoupling_log.append(abs(risk.value(x) - risk.value_decoupled(x, dec)))

    p, rows = pgd_minimize(risk, p0, pgd, callback=record)
    record(pgd.T, p.data)
    traj = [PerpRow(r.iter, pn, tn, r.value) for r, (pn, tn) in zip(rows, norms)]
    return student_init.with_params(p), traj


def perp_ratio(student: StudentNet, teacher: TeacherModel) -> float:
    _, Wperp = decompose(student.W, teacher)
    return float(np.linalg.norm(Wperp) / np.linalg.norm(student.W))


def write_perp_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iter", "perp_norm", "total_norm", "risk"])
        for r in rows:
            w.writerow([r.iter, repr(r.perp_norm), repr(r.total_norm), repr(r.risk)])


# ---------------------------------------------------------------------------
# one-dimensional toy: E[(ReLU^3(w x + b) - 1)^2] + lam w^2
# ---------------------------------------------------------------------------

_TAIL = 12.0


def _toy_moments(w, b, nodes):
    """``E[h(u)]``, ``E[h'(u) x]``, ``E[h'(u)]`` for ``u = |w| x + b``, ``h(u) = (ReLU(u)^3 - 1)^2``.

    ``h`` is 1 left of the kink ``x0 = -b/|w|`` and a polynomial right of
    it, so each expectation is a normal CDF term plus a Gauss-Legendre
    integral of polynomial times density over ``[max(x0, -12), 12]``.
    """
    w, b = np.broadcast_arrays(np.abs(np.asarray(w, dtype=float)), np.asarray(b, dtype=float))
    val, gx, g1 = np.empty(w.shape), np.zeros(w.shape), np.empty(w.shape)
    flat = w == 0
    rb = np.maximum(b[flat], 0.0)
    val[flat] = (rb**3 - 1.0) ** 2
    g1[flat] = 6.0 * (rb**3 - 1.0) * rb**2
    ww, bb = w[~flat], b[~flat]
    x0 = -bb / ww
    t, wt = np.polynomial.legendre.leggauss(nodes)
    lo = np.clip(x0, -_TAIL, _TAIL)[:, None]
    half = (_TAIL - lo) / 2
    x = lo + half * (t + 1)
    r = np.maximum(ww[:, None] * x + bb[:, None], 0.0)
    quad = half * wt * np.exp(-0.5 * x * x) / math.sqrt(2 * math.pi)
    dh = 6.0 * (r**3 - 1.0) * r**2
    val[~flat] = ndtr(x0) + (quad * (r**3 - 1.0) ** 2).sum(-1)
    gx[~flat] = (quad * dh * x).sum(-1)
    g1[~flat] = (quad * dh).sum(-1)
    return val, gx, g1


def toy_expected_loss(w, b, nodes: int = 80) -> np.ndarray:
    """``E_x[(ReLU(w x + b)^3 - 1)^2]`` for ``x ~ N(0, 1)``."""
    return _toy_moments(w, b, nodes)[0]


def toy_expected_loss_grad(w, b, nodes: int = 80):
    """Partial derivatives of :func:`toy_expected_loss` in ``w`` and ``b``."""
    _, gx, g1 = _toy_moments(w, b, nodes)
    return np.sign(np.asarray(w, dtype=float)) * gx, g1


def toy_smooth_objective(lam: float, train_bias: bool = True, nodes: int = 80):
    """The toy as a :class:`FunctionObjective` over ``(w, b)`` or ``w`` alone."""
    from .objective import FunctionObjective

    if train_bias:
        def fun(v):
            return float(toy_expected_loss(v[0], v[1], nodes) + lam * v[0] ** 2)

        def grad(v):
            gw, gb = toy_expected_loss_grad(v[0], v[1], nodes)
            return np.array([float(gw) + 2 * lam * v[0], float(gb)])

        return FunctionObjective(fun, grad, dim=2)

    def fun1(v):
        return float(toy_expected_loss(v[0], 0.0, nodes) + lam * v[0] ** 2)

    def grad1(v):
        return np.array([float(toy_expected_loss_grad(v[0], 0.0, nodes)[0]) + 2 * lam * v[0]])

    return FunctionObjective(fun1, grad1, dim=1)


def _checked_loss(w, b, nodes):
    a = toy_expected_loss(w, b, nodes)
    c = toy_expected_loss(w, b, 2 * nodes)
    gap = float(np.max(np.abs(a - c)))
    if gap > 1e-6:
        raise PrecisionError(f"quadrature changed by {gap:.2e} when doubling nodes")
    return c


def toy_objective(w, b, lam: float, nodes: int = 80):
    return toy_expected_loss(w, b, nodes) + lam * np.asarray(w, dtype=float) ** 2


class ToyResult(NamedTuple):
    w_star: float
    b_star: float
    f_star: float


def toy_1d(lam: float, train_bias: bool, grid=None, quadrature_nodes: int = 80) -> ToyResult:
    """Global minimizer of the toy objective by grid search and local refinement.

    With ``train_bias=False`` the bias is held at 0. ``grid`` is a ``w`` grid
    (frozen bias) or a ``(w_grid, b_grid)`` pair; the objective is even in
    ``w``, so only ``w >= 0`` is searched.
    """
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    if grid is None:
        wg = np.linspace(0.0, 2.0, 401)
        grid = (wg, np.linspace(-2.0, 2.0, 201)) if train_bias else wg
    if train_bias:
        wg, bg = (np.asarray(g, dtype=float) for g in grid)
        Wm, Bm = np.meshgrid(wg, bg, indexing="ij")
    else:
        wg = np.asarray(grid, dtype=float)
        Wm, Bm = wg, np.zeros_like(wg)
    if Wm.size == 0:
        raise ValueError("empty grid")
    vals = _checked_loss(Wm, Bm, quadrature_nodes) + lam * Wm**2
    i = np.unravel_index(np.argmin(vals), vals.shape)
    w0, b0 = float(Wm[i]), float(Bm[i])

    def f(z):
        w = abs(z[0])
        b = z[1] if train_bias else 0.0
        return float(toy_objective(w, b, lam, quadrature_nodes))

    start = [w0, b0] if train_bias else [w0]
    res = minimize(f, start, method="Nelder-Mead",
                   options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 4000})
    w_star, b_star = abs(float(res.x[0])), (float(res.x[1]) if train_bias else 0.0)
    f_star = float(res.fun)
    if float(vals[i]) < f_star:
        w_star, b_star, f_star = w0, b0, float(vals[i])
    f_star = float(_checked_loss(w_star, b_star, quadrature_nodes) + lam * w_star**2)
    return ToyResult(w_star, b_star, f_star)
