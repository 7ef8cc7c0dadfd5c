"""The objective contract every optimizer in the package consumes."""

from __future__ import annotations

from typing import Callable

import numpy as np

from .params import ParamVector, as_array


class SmoothObjective:
    """Base class for twice-differentiable objectives.

    Subclasses implement ``value`` and ``gradient`` on flat arrays and may
    implement ``hessian`` and/or ``hvp``. ``L`` and ``K`` are the declared
    gradient- and Hessian-Lipschitz constants (``None`` when unknown).
    Every method also accepts a :class:`ParamVector`.
    """

    dim: int
    L: float | None = None
    K: float | None = None
    lower_bounded: bool = True

    def value(self, p) -> float:
        raise NotImplementedError

    def gradient(self, p) -> np.ndarray:
        raise NotImplementedError

    def value_and_gradient(self, p) -> tuple[float, np.ndarray]:
        return self.value(p), self.gradient(p)

    def hessian(self, p) -> np.ndarray:
        raise NotImplementedError

    def hvp(self, p, v) -> np.ndarray:
        if self.has_hessian:
            return self.hessian(p) @ np.asarray(v, dtype=float)
        raise NotImplementedError

    @property
    def has_hessian(self) -> bool:
        return type(self).hessian is not SmoothObjective.hessian

    @property
    def has_hvp(self) -> bool:
        return self.has_hessian or type(self).hvp is not SmoothObjective.hvp

    def template(self) -> ParamVector | None:
        """Segment layout of the parameter vector, if the objective has one."""
        return None


class FunctionObjective(SmoothObjective):
    """Wrap plain callables on flat arrays as a :class:`SmoothObjective`.

    >>> saddle = FunctionObjective(lambda x: x[0]**2 - x[1]**2,
    ...                            lambda x: np.array([2*x[0], -2*x[1]]),
    ...                            hessian=lambda x: np.diag([2.0, -2.0]),
    ...                            dim=2, L=2.0, K=0.0, lower_bounded=False)
    """

    def __init__(
        self,
        fun: Callable[[np.ndarray], float],
        grad: Callable[[np.ndarray], np.ndarray],
        hessian: Callable[[np.ndarray], np.ndarray] | None = None,
        *,
        dim: int,
        L: float | None = None,
        K: float | None = None,
        lower_bounded: bool = True,
        hvp: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None,
    ):
        self._fun = fun
        self._grad = grad
        self._hess = hessian
        self._hvp = hvp
        self.dim = int(dim)
        self.L = L
        self.K = K
        self.lower_bounded = lower_bounded

    def value(self, p):
        return float(self._fun(as_array(p)))

    def gradient(self, p):
        return np.asarray(self._grad(as_array(p)), dtype=float).reshape(self.dim)

    def hessian(self, p):
        if self._hess is None:
            raise NotImplementedError("no Hessian supplied")
        return np.asarray(self._hess(as_array(p)), dtype=float).reshape(self.dim, self.dim)

    def hvp(self, p, v):
        if self._hvp is not None:
            return np.asarray(self._hvp(as_array(p), np.asarray(v, dtype=float)), dtype=float)
        return self.hessian(p) @ np.asarray(v, dtype=float)

    @property
    def has_hessian(self):
        return self._hess is not None

    @property
    def has_hvp(self):
        return self._hess is not None or self._hvp is not None


def quadratic(Q, c=None, *, K: float = 0.0) -> FunctionObjective:
    """``0.5 x^T Q x + c^T x`` with exact derivatives; ``L`` is the spectral norm of Q."""
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    c = np.zeros(Q.shape[0]) if c is None else np.asarray(c, dtype=float)
    eig = np.linalg.eigvalsh(0.5 * (Q + Q.T))
    return FunctionObjective(
        lambda x: 0.5 * x @ Q @ x + c @ x,
        lambda x: Q @ x + c,
        lambda x: Q,
        dim=Q.shape[0],
        L=float(np.max(np.abs(eig))),
        K=K,
        lower_bounded=bool(eig.min() >= 0),
    )
