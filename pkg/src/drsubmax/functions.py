"""Objective interfaces and correctness checkers.

A :class:`DRFunction` exposes a non-negative value, an exact gradient and an
unbiased stochastic gradient on the unit cube, together with declared
constants (gradient-norm bound, smoothness, noise level) that engines consume
for step sizes.  The checkers in this module validate the diminishing-returns
structure and the gradient implementation numerically; shipped instances are
expected to pass them before any experiment uses them.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)

DR_TOL = 1e-8
GRAD_CHECK_TOL = 1e-5


class DRFunction:
    """Base class for objectives F: [0,1]^n -> R+.

    Parameters
    ----------
    n : dimension of the domain.
    grad_norm_bound : declared bound on ||grad F||; None if unknown.
    smoothness : declared Lipschitz constant of the gradient; None if unknown.
    noise_std : standard deviation budget of the stochastic gradient.
    """

    def __init__(self, n: int, grad_norm_bound=None, smoothness=None, noise_std: float = 0.0):
        self.n = int(n)
        self.grad_norm_bound = grad_norm_bound
        self.smoothness = smoothness
        self.noise_std = float(noise_std)

    def value(self, x) -> float:
        raise NotImplementedError

    def gradient(self, x) -> np.ndarray:
        raise NotImplementedError

    def value_batch(self, xs) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        return np.array([self.value(row) for row in xs])

    def stochastic_gradient(self, x, rng) -> np.ndarray:
        """Unbiased estimate: exact gradient plus isotropic Gaussian noise.

        The total noise variance equals noise_std**2 (per-coordinate variance
        noise_std**2 / n), so sigma = 0 returns the exact gradient.
        """
        g = self.gradient(x)
        if self.noise_std > 0:
            g = g + rng.normal(0.0, self.noise_std / np.sqrt(self.n), self.n)
        return g

    def __add__(self, other):
        if not isinstance(other, DRFunction):
            return NotImplemented
        return SumFunction.combine(self, other)

    __radd__ = __add__


class SumFunction(DRFunction):
    """Pointwise sum of objectives; used by hindsight comparators and
    follow-the-leader oracles when no closed-form combination exists."""

    def __init__(self, parts):
        parts = list(parts)
        if not parts:
            raise ValueError("empty sum")
        n = parts[0].n
        if any(p.n != n for p in parts):
            raise ValueError("summands live in different dimensions")
        bounds = [p.grad_norm_bound for p in parts]
        smooth = [p.smoothness for p in parts]
        super().__init__(
            n,
            grad_norm_bound=None if any(b is None for b in bounds) else float(np.sum(bounds)),
            smoothness=None if any(s is None for s in smooth) else float(np.sum(smooth)),
        )
        self.parts = parts

    @staticmethod
    def combine(a: DRFunction, b: DRFunction) -> "SumFunction":
        parts = list(a.parts) if isinstance(a, SumFunction) else [a]
        parts += list(b.parts) if isinstance(b, SumFunction) else [b]
        return SumFunction(parts)

    def value(self, x) -> float:
        return float(sum(p.value(x) for p in self.parts))

    def gradient(self, x) -> np.ndarray:
        g = np.zeros(self.n)
        for p in self.parts:
            g += p.gradient(x)
        return g

    def value_batch(self, xs) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        total = np.zeros(xs.shape[0])
        for p in self.parts:
            total += p.value_batch(xs)
        return total


# ---------------------------------------------------------------------------
# correctness checkers
# ---------------------------------------------------------------------------

@dataclass
class DrReport:
    """Worst observed violations of the diminishing-returns inequalities."""

    value_violation: float
    gradient_violation: float
    trials: int
    witness: tuple | None = None
    tol: float = DR_TOL

    @property
    def passed(self) -> bool:
        return max(self.value_violation, self.gradient_violation) <= self.tol


def dr_check(fn: DRFunction, trials: int, rng, tol: float = DR_TOL) -> DrReport:
    """Probe random ordered pairs y <= x for the two DR inequalities.

    Checks the coordinate-increment inequality
    F(x + a e_i) - F(x) <= F(y + a e_i) - F(y) and gradient antitonicity
    grad F(x) <= grad F(y); reports the largest violations found.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    n = fn.n
    worst_val, worst_grad, witness = -np.inf, -np.inf, None
    for _ in range(trials):
        x = rng.uniform(0.0, 1.0, n)
        y = x * rng.uniform(0.0, 1.0, n)
        i = int(rng.integers(n))
        alpha = float(rng.uniform(0.0, 1.0 - x[i]))
        e = np.zeros(n)
        e[i] = alpha
        gap = (fn.value(x + e) - fn.value(x)) - (fn.value(y + e) - fn.value(y))
        if gap > worst_val:
            worst_val, witness = gap, (x.copy(), y.copy(), i, alpha)
        grad_gap = float(np.max(fn.gradient(x) - fn.gradient(y)))
        worst_grad = max(worst_grad, grad_gap)
    return DrReport(float(worst_val), float(worst_grad), trials, witness, tol)


def grad_check(fn: DRFunction, x, h: float = 1e-5) -> float:
    """Max relative error of the gradient against central finite differences."""
    if not 1e-6 <= h <= 1e-3:
        raise ValueError("h must lie in [1e-6, 1e-3]")
    x = np.asarray(x, dtype=float)
    g = fn.gradient(x)
    worst = 0.0
    for i in range(fn.n):
        e = np.zeros(fn.n)
        e[i] = h
        fd = (fn.value(x + e) - fn.value(x - e)) / (2.0 * h)
        worst = max(worst, abs(fd - g[i]) / max(1.0, abs(g[i])))
    return float(worst)


# ---------------------------------------------------------------------------
# smoothing
# ---------------------------------------------------------------------------

def smoothing_radius(horizon: int) -> float:
    """Default ball radius for smoothing a non-smooth objective: 1/sqrt(T)."""
    return 1.0 / float(np.sqrt(horizon))


def _uniform_ball(rng, n: int, count: int) -> np.ndarray:
    u = rng.normal(size=(count, n))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    radii = rng.uniform(0.0, 1.0, count) ** (1.0 / n)
    return u * radii[:, None]


def _uniform_sphere(rng, n: int, count: int) -> np.ndarray:
    u = rng.normal(size=(count, n))
    return u / np.linalg.norm(u, axis=1, keepdims=True)


def smoothed_value_and_gradient(fn: DRFunction, x, delta: float, samples: int,
                                rng) -> tuple[float, np.ndarray]:
    """Monte-Carlo estimate of the ball-averaged value and its gradient.

    The value estimate averages F over a radius-delta ball around x; the
    gradient estimate is the sphere-sampling estimator
    (n/delta) * mean[(F(x + delta u) - F(x)) u], centered at F(x) to cut
    variance (E[u] = 0 keeps it unbiased).  Both are unbiased for the
    smoothed function; the bias against F itself is at most delta * G.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    if samples < 1:
        raise ValueError("samples must be >= 1")
    x = np.asarray(x, dtype=float)
    if np.any(x < delta - 1e-12) or np.any(x > 1.0 - delta + 1e-12):
        raise ValueError("point too close to the cube boundary for this delta")
    ball = _uniform_ball(rng, fn.n, samples)
    value = float(np.mean(fn.value_batch(x[None, :] + delta * ball)))
    sphere = _uniform_sphere(rng, fn.n, samples)
    vals = fn.value_batch(x[None, :] + delta * sphere) - fn.value(x)
    grad = (fn.n / delta) * np.mean(vals[:, None] * sphere, axis=0)
    return value, grad


# ---------------------------------------------------------------------------
# parameter estimation
# ---------------------------------------------------------------------------

def estimate_params(fn: DRFunction, rng, samples: int = 256, inflation: float = 1.1) -> dict:
    """Empirical stand-ins for undeclared G / beta, inflated and logged.

    Estimates are never substituted silently: callers must opt in, and the
    values are reported through the module logger.
    """
    xs = rng.uniform(0.0, 1.0, (samples, fn.n))
    grads = np.array([fn.gradient(x) for x in xs])
    g_hat = float(np.max(np.linalg.norm(grads, axis=1))) * inflation
    beta_hat = 0.0
    for _ in range(samples):
        i, j = rng.integers(samples), rng.integers(samples)
        dx = float(np.linalg.norm(xs[i] - xs[j]))
        if dx > 1e-9:
            beta_hat = max(beta_hat, float(np.linalg.norm(grads[i] - grads[j])) / dx)
    beta_hat *= inflation
    est = {"grad_norm_bound": g_hat, "smoothness": beta_hat}
    logger.info("estimated objective constants (inflated x%.2f): G=%.6g beta=%.6g",
                inflation, g_hat, beta_hat)
    return est
