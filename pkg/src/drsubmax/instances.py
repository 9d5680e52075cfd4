"""Objective families and data: social-graph revenue, quadratics, samplers."""

from __future__ import annotations

import gzip
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .functions import DRFunction


class EdgeListError(ValueError):
    """Malformed edge-list input (reported with the offending line number)."""


@dataclass(frozen=True)
class Graph:
    """Weighted graph with non-negative weights and no self-loops.

    Undirected inputs are stored symmetrically; `weights` is CSR n x n.
    """

    weights: sp.csr_matrix

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    @property
    def edge_count(self) -> int:
        return int(self.weights.nnz // 2)

    def __repr__(self):
        return f"Graph(n={self.n}, edges={self.edge_count})"


def load_edge_list(path) -> Graph:
    """Read "u v" or "u v w" lines (0-indexed, '#' comments, .gz accepted).

    Duplicate edges accumulate their weights; self-loops and negative
    weights are rejected with the line number.
    """
    opener = gzip.open if str(path).endswith(".gz") else open
    acc: dict[tuple[int, int], float] = {}
    max_vertex = -1
    with opener(path, "rt") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) not in (2, 3):
                raise EdgeListError(f"line {lineno}: expected 'u v' or 'u v w', got {line!r}")
            try:
                u, v = int(parts[0]), int(parts[1])
                w = float(parts[2]) if len(parts) == 3 else 1.0
            except ValueError as exc:
                raise EdgeListError(f"line {lineno}: {exc}") from exc
            if u < 0 or v < 0:
                raise EdgeListError(f"line {lineno}: negative vertex id")
            if u == v:
                raise EdgeListError(f"line {lineno}: self-loop {u}->{v} rejected")
            if w < 0:
                raise EdgeListError(f"line {lineno}: negative weight {w}")
            acc[(u, v)] = acc.get((u, v), 0.0) + w
            acc[(v, u)] = acc.get((v, u), 0.0) + w
            max_vertex = max(max_vertex, u, v)
    n = max_vertex + 1
    if n == 0:
        return Graph(sp.csr_matrix((0, 0)))
    rows = np.fromiter((k[0] for k in acc), dtype=int, count=len(acc))
    cols = np.fromiter((k[1] for k in acc), dtype=int, count=len(acc))
    vals = np.fromiter(acc.values(), dtype=float, count=len(acc))
    return Graph(sp.csr_matrix((vals, (rows, cols)), shape=(n, n)))


def gen_random_graph(n: int, edge_prob: float, weight_range=(1.0, 1.0), seed=0) -> Graph:
    """Erdos-Renyi undirected graph with i.i.d. uniform weights."""
    if not 0.0 <= edge_prob <= 1.0:
        raise ValueError("edge_prob must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(n, k=1)
    mask = rng.random(iu.size) < edge_prob
    iu, ju = iu[mask], ju[mask]
    lo, hi = weight_range
    vals = rng.uniform(lo, hi, iu.size)
    rows = np.concatenate([iu, ju])
    cols = np.concatenate([ju, iu])
    data = np.concatenate([vals, vals])
    return Graph(sp.csr_matrix((data, (rows, cols)), shape=(n, n)))


class RevenueFunction(DRFunction):
    """Expected word-of-mouth revenue of an investment vector on a graph.

    Investing x_i makes user i an advocate with probability 1 - (1-p)^{x_i};
    the revenue counts edge weights from advocates to non-advocates:

        F(x) = sum_{i != j} w_ij (1 - (1-p)^{x_i}) (1-p)^{x_j}.

    Non-monotone DR-submodular for any p in (0, 1) and w >= 0.
    """

    def __init__(self, weights: sp.csr_matrix, p: float):
        if not 0.0 < p < 1.0:
            raise ValueError("p must lie in the open interval (0, 1)")
        n = weights.shape[0]
        self.weights = weights.tocsr()
        self.weights_t = self.weights.T.tocsr()
        self.p = float(p)
        self._log1p = float(np.log1p(-p))  # log(1-p) < 0
        row_sums = np.asarray(self.weights.sum(axis=1)).ravel()
        col_sums = np.asarray(self.weights.sum(axis=0)).ravel()
        grad_bound = abs(self._log1p) * float(np.linalg.norm(np.maximum(row_sums, col_sums)))
        hess_bound = np.abs(self.weights + self.weights_t).toarray() if n <= 512 else None
        if hess_bound is not None:
            np.fill_diagonal(hess_bound, row_sums + col_sums)
            smooth = self._log1p ** 2 * float(np.linalg.norm(hess_bound, "fro"))
        else:
            smooth = self._log1p ** 2 * float(np.sqrt(np.sum((row_sums + col_sums) ** 2)))
        super().__init__(n, grad_norm_bound=grad_bound, smoothness=smooth)

    def _split(self, x):
        q = (1.0 - self.p) ** np.asarray(x, dtype=float)
        return 1.0 - q, q

    def value(self, x) -> float:
        a, b = self._split(x)
        return float(a @ (self.weights @ b))

    def value_batch(self, xs) -> np.ndarray:
        q = (1.0 - self.p) ** np.asarray(xs, dtype=float)
        a = 1.0 - q
        return np.einsum("ti,ti->t", a, (self.weights @ q.T).T)

    def gradient(self, x) -> np.ndarray:
        a, q = self._split(x)
        return self._log1p * q * (self.weights_t @ a - self.weights @ q)

    def __add__(self, other):
        if isinstance(other, RevenueFunction) and other.p == self.p and other.n == self.n:
            return RevenueFunction(self.weights + other.weights, self.p)
        return super().__add__(other)

    __radd__ = __add__


def two_vertex_revenue(p: float = 0.5, weight: float = 1.0) -> RevenueFunction:
    """The classic two-user instance: a single edge of the given weight."""
    w = sp.csr_matrix(np.array([[0.0, weight], [weight, 0.0]]))
    return RevenueFunction(w, p)


class BatchSampler:
    """Per-round revenue objectives over uniformly sampled vertex batches.

    Each draw picks `batch_size` vertices independently of previous rounds
    and masks the graph to edges inside the batch (weighted inputs keep
    their weights; unit-weight data reproduces the 0/1 construction).
    """

    def __init__(self, graph: Graph, batch_size: int, p: float, rng):
        if batch_size > graph.n:
            raise ValueError("batch size exceeds the number of vertices")
        self.graph = graph
        self.batch_size = int(batch_size)
        self.p = float(p)
        self.rng = rng

    def draw(self) -> RevenueFunction:
        n = self.graph.n
        chosen = self.rng.choice(n, size=self.batch_size, replace=False)
        mask = np.zeros(n)
        mask[chosen] = 1.0
        d = sp.diags(mask)
        return RevenueFunction((d @ self.graph.weights @ d).tocsr(), self.p)


class QuadraticFunction(DRFunction):
    """F(x) = x'Hx/2 + h'x + c with every Hessian entry non-positive.

    The sign pattern makes F DR-submodular on the whole cube; h >= 0 and the
    offset keep it non-negative.
    """

    def __init__(self, quad: np.ndarray, lin: np.ndarray, offset: float):
        quad = np.asarray(quad, dtype=float)
        lin = np.asarray(lin, dtype=float)
        n = lin.shape[0]
        if quad.shape != (n, n):
            raise ValueError("quadratic term must be n x n")
        if not np.allclose(quad, quad.T):
            raise ValueError("quadratic term must be symmetric")
        if np.any(quad > 0):
            raise ValueError("all second-derivative entries must be <= 0")
        if np.any(lin < 0):
            raise ValueError("linear term must be non-negative")
        if offset < 0:
            raise ValueError("offset must be non-negative")
        spectral = float(np.linalg.norm(quad, 2)) if n else 0.0
        super().__init__(n,
                         grad_norm_bound=spectral * np.sqrt(n) + float(np.linalg.norm(lin)),
                         smoothness=spectral)
        self.quad, self.lin, self.offset = quad, lin, float(offset)

    def value(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(0.5 * x @ self.quad @ x + self.lin @ x + self.offset)

    def value_batch(self, xs) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        return 0.5 * np.einsum("ti,ij,tj->t", xs, self.quad, xs) + xs @ self.lin + self.offset

    def gradient(self, x) -> np.ndarray:
        return self.quad @ np.asarray(x, dtype=float) + self.lin

    def __add__(self, other):
        if isinstance(other, QuadraticFunction) and other.n == self.n:
            return QuadraticFunction(self.quad + other.quad, self.lin + other.lin,
                                     self.offset + other.offset)
        return super().__add__(other)

    __radd__ = __add__


def gen_random_quadratic(n: int, rng, density: float = 0.6, scale: float = 1.0) -> QuadraticFunction:
    """Random DR-submodular quadratic, non-negative on the cube by construction."""
    raw = rng.uniform(0.0, scale, (n, n)) * (rng.random((n, n)) < density)
    quad = -(raw + raw.T) / 2.0
    lin = rng.uniform(0.0, scale, n)
    # x'Hx >= sum(H) on the cube for H <= 0, so this offset guarantees F >= 0
    offset = -0.5 * float(quad.sum())
    return QuadraticFunction(quad, lin, offset)


class LinearFunction(DRFunction):
    """F(x) = w'x + offset; the degenerate DR family used in oracles' tests."""

    def __init__(self, w, offset: float = 0.0):
        w = np.asarray(w, dtype=float)
        super().__init__(w.shape[0], grad_norm_bound=float(np.linalg.norm(w)), smoothness=0.0)
        self.w, self.offset = w, float(offset)

    def value(self, x) -> float:
        return float(self.w @ np.asarray(x, dtype=float) + self.offset)

    def value_batch(self, xs) -> np.ndarray:
        return np.asarray(xs, dtype=float) @ self.w + self.offset

    def gradient(self, x) -> np.ndarray:
        return self.w.copy()

    def __add__(self, other):
        if isinstance(other, LinearFunction) and other.n == self.n:
            return LinearFunction(self.w + other.w, self.offset + other.offset)
        return super().__add__(other)

    __radd__ = __add__


def noisy_gradient(fn: DRFunction, x, sigma: float, rng) -> np.ndarray:
    """Exact gradient plus zero-mean Gaussian noise of total variance sigma^2."""
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    g = fn.gradient(x)
    if sigma > 0:
        g = g + rng.normal(0.0, sigma / np.sqrt(fn.n), fn.n)
    return g
