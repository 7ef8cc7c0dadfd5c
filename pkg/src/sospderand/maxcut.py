"""MAXCUT: exact oracle, vector embeddings, and derandomized hyperplane rounding.

Randomized rounding assigns ``x_i = sign(v_i . z)`` for Gaussian ``z``.
:func:`derandomize_round` instead optimizes a mean shift ``mu`` of the
Gaussian point ``V z + mu`` against a smoothed expected cut while a penalty
shrinks the randomness; the deterministic cut is ``sign(mu)``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import CapabilityError, NumericalAbort
from .smoothing import sign_disagree_smooth, sign_disagree_smooth_grad

BRUTE_FORCE_MAX_N = 24


@dataclass(frozen=True)
class Graph:
    """Unweighted undirected graph; ``edges`` is an ``(m, 2)`` int array with ``i < j``."""

    n_vertices: int
    edges: np.ndarray

    def __post_init__(self):
        if self.n_vertices < 1:
            raise ValueError("graph needs at least one vertex")
        E = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if E.size and (E.min() < 0 or E.max() >= self.n_vertices):
            raise ValueError("edge endpoint out of range")
        if np.any(E[:, 0] == E[:, 1]):
            raise ValueError("self-loops are not allowed")
        E = np.sort(E, axis=1)
        if len(np.unique(E, axis=0)) != len(E):
            raise ValueError("duplicate edges")
        object.__setattr__(self, "edges", E)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def adjacency(self) -> np.ndarray:
        A = np.zeros((self.n_vertices, self.n_vertices))
        A[self.edges[:, 0], self.edges[:, 1]] = 1.0
        A[self.edges[:, 1], self.edges[:, 0]] = 1.0
        return A

    def degrees(self) -> np.ndarray:
        return np.bincount(self.edges.ravel(), minlength=self.n_vertices)


def complete_graph(n: int) -> Graph:
    return Graph(n, [(i, j) for i in range(n) for j in range(i + 1, n)])


def cycle_graph(n: int) -> Graph:
    return Graph(n, [(min(i, (i + 1) % n), max(i, (i + 1) % n)) for i in range(n)])


def random_graph(n: int, p: float, seed: int = 0) -> Graph:
    """Erdos-Renyi ``G(n, p)``; pairs are visited in lexicographic order."""
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(n, 1)
    keep = rng.random(iu.size) < p
    return Graph(n, np.stack([iu[keep], ju[keep]], axis=1))


def read_graph(path) -> Graph:
    """Text format: a line ``n m`` then ``m`` lines ``i j`` (0-indexed)."""
    with open(path) as fh:
        tokens = fh.read().split()
    if len(tokens) < 2:
        raise ValueError("graph file needs a header line 'n m'")
    n, m = int(tokens[0]), int(tokens[1])
    body = tokens[2:]
    if len(body) != 2 * m:
        raise ValueError(f"expected {m} edges, found {len(body) / 2:g}")
    return Graph(n, np.array(body, dtype=np.int64).reshape(m, 2))


def write_graph(g: Graph, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"{g.n_vertices} {g.n_edges}\n")
        for i, j in g.edges:
            fh.write(f"{i} {j}\n")


def _signs(g: Graph, x) -> np.ndarray:
    x = np.asarray(x)
    if x.shape != (g.n_vertices,):
        raise ValueError(f"need {g.n_vertices} signs, got shape {x.shape}")
    if not np.all(np.isin(x, (-1, 1))):
        raise ValueError("assignment entries must be -1 or +1")
    return x


def cut_value(g: Graph, x) -> int:
    x = _signs(g, x)
    return int(np.sum(x[g.edges[:, 0]] != x[g.edges[:, 1]]))


class CutAssignment(NamedTuple):
    x: np.ndarray
    value: int


def sign_round(v) -> np.ndarray:
    """``sign`` with zeros sent to +1."""
    return np.where(np.asarray(v) >= 0, 1, -1)


def brute_force_maxcut(g: Graph, *, chunk: int = 1 << 16) -> CutAssignment:
    """Exact maximum cut over all ``2^(n-1)`` assignments with ``x_0 = +1``."""
    n = g.n_vertices
    if n > BRUTE_FORCE_MAX_N:
        raise CapabilityError(f"brute force limited to n <= {BRUTE_FORCE_MAX_N}, got {n}")
    if g.n_edges == 0:
        return CutAssignment(np.ones(n, dtype=int), 0)
    i, j = g.edges[:, 0], g.edges[:, 1]
    bits = np.arange(n - 1, dtype=np.int64)
    best, best_code = -1, 0
    total = 1 << (n - 1)
    for start in range(0, total, chunk):
        codes = np.arange(start, min(start + chunk, total), dtype=np.int64)
        pats = np.zeros((codes.size, n), dtype=np.int8)
        pats[:, 1:] = (codes[:, None] >> bits) & 1
        cuts = (pats[:, i] != pats[:, j]).sum(1)
        k = int(np.argmax(cuts))
        if cuts[k] > best:
            best, best_code = int(cuts[k]), int(codes[k])
    x = np.ones(n, dtype=int)
    x[1:] = np.where((best_code >> bits) & 1, -1, 1)
    return CutAssignment(x, best)


# ---------------------------------------------------------------------------
# embeddings
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Embedding:
    V: np.ndarray

    def __post_init__(self):
        V = np.atleast_2d(np.asarray(self.V, dtype=float))
        if not np.allclose(np.linalg.norm(V, axis=1), 1.0, atol=1e-8, rtol=0):
            raise ValueError("embedding rows must have unit norm")
        object.__setattr__(self, "V", V)


def _unit_rows(V) -> np.ndarray:
    V = np.array(V, dtype=float)
    zero = np.linalg.norm(V, axis=1) == 0
    V[zero, 0] += 1e-12
    return V / np.linalg.norm(V, axis=1, keepdims=True)


def sdp_value(g: Graph, V) -> float:
    V = np.asarray(V, dtype=float)
    i, j = g.edges[:, 0], g.edges[:, 1]
    return float(np.sum((1.0 - np.sum(V[i] * V[j], axis=1)) / 2.0))


def spectral_embedding(g: Graph, r: int) -> Embedding:
    """Top-``r`` adjacency eigenvectors as columns, rows normalized.

    Each eigenvector is signed so its largest-magnitude entry is positive.
    All-zero rows are nudged by ``1e-12`` along the first axis before
    normalizing.
    """
    if not 1 <= r <= g.n_vertices:
        raise ValueError(f"rank must be in [1, {g.n_vertices}]")
    _, vecs = np.linalg.eigh(g.adjacency())
    top = vecs[:, ::-1][:, :r].copy()
    for c in range(r):
        k = int(np.argmax(np.abs(top[:, c])))
        if top[k, c] < 0:
            top[:, c] *= -1
    return Embedding(_unit_rows(top))


def default_rank(n: int) -> int:
    return math.ceil(math.sqrt(2 * n)) + 1


def sdp_embedding(g: Graph, r: int | None = None, iters: int = 2000, seed: int = 0) -> Embedding:
    """Low-rank SDP solution by projected gradient on unit-norm rows.

    Maximizes ``sum_E (1 - v_i . v_j)/2`` with step ``1/(2 max degree)``
    and row renormalization. The best iterate is kept and is never worse
    than the spectral embedding of the same rank.
    """
    n = g.n_vertices
    r = default_rank(n) if r is None else r
    if r < 1:
        raise ValueError("rank must be positive")
    A = g.adjacency()
    V = _unit_rows(np.random.default_rng(seed).standard_normal((n, r)))
    best, best_val = V, sdp_value(g, V)
    maxdeg = g.degrees().max() if g.n_edges else 0
    if maxdeg > 0:
        step = 1.0 / (2.0 * maxdeg)
        for _ in range(iters):
            V = _unit_rows(V - step * (A @ V))
            if not np.all(np.isfinite(V)):
                raise NumericalAbort("non-finite SDP iterate")
            val = sdp_value(g, V)
            if val > best_val:
                best, best_val = V, val
    spectral = spectral_embedding(g, min(r, n)).V
    if spectral.shape[1] < r:
        spectral = np.hstack([spectral, np.zeros((n, r - spectral.shape[1]))])
    if sdp_value(g, spectral) > best_val:
        best = spectral
    return Embedding(best)


class GWResult(NamedTuple):
    best_cut: int
    mean_cut: float
    se: float
    best_x: np.ndarray


def gw_randomized_round(g: Graph, emb: Embedding, trials: int, seed: int = 0) -> GWResult:
    """Random-hyperplane rounding repeated ``trials`` times."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    Z = np.random.default_rng(seed).standard_normal((trials, emb.V.shape[1]))
    X = sign_round(Z @ emb.V.T)
    cuts = (X[:, g.edges[:, 0]] != X[:, g.edges[:, 1]]).sum(1)
    k = int(np.argmax(cuts))
    se = float(cuts.std(ddof=1) / math.sqrt(trials)) if trials > 1 else math.inf
    return GWResult(int(cuts[k]), float(cuts.mean()), se, X[k])


# ---------------------------------------------------------------------------
# derandomization
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DerandConfig:
    """Settings for :func:`derandomize_round`.

    ``eps=None`` picks ``eps_fraction`` times the median ``|v_i . z|`` over
    1000 initial draws. ``lam=None`` uses ``(sqrt(rho/eps^3) + Delta)/2``.
    """

    T: int = 5000
    samples: int = 100
    lr_mean: float = 0.01
    lr_sigma: float = 0.001
    scale_clip: tuple[float, float] = (1e-3, 1.5)
    decay: float = 0.99
    decay_every: int = 100
    eps: float | None = None
    eps_fraction: float = 0.05
    rho: float = 1e-4
    Delta: float = 0.5
    lam: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.T < 1 or self.samples < 1 or self.decay_every < 1:
            raise ValueError("T, samples and decay_every must be positive")
        lo, hi = self.scale_clip
        if not 0 < lo <= hi:
            raise ValueError("scale_clip must satisfy 0 < lo <= hi")
        for name in ("lr_mean", "lr_sigma", "decay", "eps_fraction", "rho", "Delta"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.eps is not None and not self.eps > 0:
            raise ValueError("eps must be positive")


@dataclass
class RoundingState:
    V: np.ndarray
    scale: np.ndarray
    mu: np.ndarray
    eps: float
    lam: float

    def __post_init__(self):
        if not (self.eps > 0 and self.lam > 0):
            raise ValueError("eps and lam must be positive")

    @property
    def effective_V(self) -> np.ndarray:
        return self.scale[:, None] * self.V


class DerandRow(NamedTuple):
    iter: int
    sampled_cut: float
    max_scale: float


class DerandResult(NamedTuple):
    mu: np.ndarray
    assignment: CutAssignment
    trajectory: list
    state: RoundingState


def smoothed_disagreements(g: Graph, X, eps: float) -> np.ndarray:
    """Per-sample sum over edges of the smoothed sign-disagreement, ``X`` of shape ``(S, n)``."""
    X = np.atleast_2d(X)
    return sign_disagree_smooth(X[:, g.edges[:, 0]], X[:, g.edges[:, 1]], eps).sum(1)


def exact_disagreements(g: Graph, X) -> np.ndarray:
    X = np.atleast_2d(X)
    return (np.sign(X[:, g.edges[:, 0]]) * np.sign(X[:, g.edges[:, 1]]) < 0).sum(1)


def regularization(rho: float, eps: float, Delta: float) -> float:
    return (math.sqrt(rho / eps**3) + Delta) / 2.0


def derandomize_round(emb: Embedding, g: Graph, cfg: DerandConfig = DerandConfig()) -> DerandResult:
    """Minimize ``-E sum_E I~(x_i, x_j) + lam sum_i s_i^2`` with ``x = diag(s) V z + mu``.

    ``mu`` starts at 0 and each row scale ``s_i`` at 1. Gradients are Monte
    Carlo averages over ``cfg.samples`` fresh draws per step; learning rates
    are multiplied by ``cfg.decay`` every ``cfg.decay_every`` steps.
    """
    V = emb.V
    n, r = V.shape
    if n != g.n_vertices:
        raise ValueError("embedding and graph sizes differ")
    rng = np.random.default_rng(cfg.seed)
    Z0 = rng.standard_normal((1000, r))
    eps = cfg.eps if cfg.eps is not None else cfg.eps_fraction * float(np.median(np.abs(Z0 @ V.T)))
    if not eps > 0:
        raise ValueError("embedding gives zero median margin; pass eps explicitly")
    lam = cfg.lam if cfg.lam is not None else regularization(cfg.rho, eps, cfg.Delta)
    mu = np.zeros(n)
    s = np.ones(n)
    lo, hi = cfg.scale_clip
    s = np.clip(s, lo, hi)
    i, j = g.edges[:, 0], g.edges[:, 1]
    lr_m, lr_s = cfg.lr_mean, cfg.lr_sigma
    rows = []
    for t in range(cfg.T):
        if t and t % cfg.decay_every == 0:
            lr_m *= cfg.decay
            lr_s *= cfg.decay
        Z = rng.standard_normal((cfg.samples, r))
        P = Z @ V.T
        X = P * s + mu
        gi, gj = sign_disagree_smooth_grad(X[:, i], X[:, j], eps)
        Gx = np.zeros((cfg.samples, n))
        np.add.at(Gx.T, i, gi.T)
        np.add.at(Gx.T, j, gj.T)
        g_mu = -Gx.mean(0)
        g_s = -(Gx * P).mean(0) + 2.0 * lam * s
        if not (np.all(np.isfinite(g_mu)) and np.all(np.isfinite(g_s))):
            raise NumericalAbort(f"non-finite gradient at iterate {t}", index=t)
        signs = sign_round(X)
        rows.append(DerandRow(t, float((signs[:, i] != signs[:, j]).sum(1).mean()), float(s.max())))
        mu = mu - lr_m * g_mu
        s = np.clip(s - lr_s * g_s, lo, hi)
    x = sign_round(mu)
    state = RoundingState(V, s, mu, eps, lam)
    return DerandResult(mu, CutAssignment(x, cut_value(g, x)), rows, state)


def write_derand_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iter", "sampled_cut", "max_scale"])
        for r in rows:
            w.writerow([r.iter, repr(r.sampled_cut), repr(r.max_scale)])
