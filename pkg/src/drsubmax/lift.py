"""Unary lattice lifting, decomposition rounding, and the vee-learning oracle.

A coordinate value l/M is encoded as the bit block 1^l 0^(M-l); a lattice
point in [0,1]^n becomes a "staircase" 0/1 vector of length n*M.  Coordinate
maxima turn into bitwise maxima and vee rewards <a, c v x> become linear in
the lifted space, so an online linear oracle over the lifted body solves the
(non-concave) vee-learning problem after rounding its relaxed iterate back
to a staircase vertex.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.optimize import isotonic_regression

from .oracles import OnlineGradientAscent, FollowPerturbedLeader, ProtocolError
from .rng import make_rng

LATTICE_TOL = 1e-9


class LatticeError(ValueError):
    """Off-lattice input or staircase violation."""


class UnsupportedLiftedBase(ValueError):
    """The lifted vertex oracle is exact only for hypercube and unit-cost
    budget bases; other kinds must not be silently approximated."""


class RoundingError(RuntimeError):
    """Decomposition failed to reach the requested accuracy."""


def default_granularity(horizon: int, n: int) -> int:
    """Lattice resolution (T/n)^(1/4), floored at 1."""
    return max(1, math.ceil((horizon / n) ** 0.25))


class UnaryLattice:
    """The grid {0, 1/M, ..., 1}^n and its staircase encoding."""

    def __init__(self, n: int, granularity: int):
        if granularity < 1:
            raise LatticeError("granularity must be a positive integer")
        self.n = int(n)
        self.m = int(granularity)

    @property
    def lifted_dim(self) -> int:
        return self.n * self.m

    def snap(self, c) -> np.ndarray:
        """Round each coordinate down to the nearest grid multiple.

        The result never exceeds the input, so snapping preserves
        feasibility in any down-closed body.
        """
        c = np.asarray(c, dtype=float)
        if np.any(c < -LATTICE_TOL) or np.any(c > 1 + LATTICE_TOL):
            raise LatticeError("snap expects a point of the unit cube")
        levels = np.floor(np.clip(c, 0.0, 1.0) * self.m + LATTICE_TOL)
        return levels / self.m

    def levels(self, x) -> np.ndarray:
        """Integer grid levels of an on-lattice point; raises off the grid."""
        x = np.asarray(x, dtype=float)
        lv = np.rint(x * self.m)
        if np.any(np.abs(lv / self.m - x) > LATTICE_TOL) or np.any(lv < 0) or np.any(lv > self.m):
            raise LatticeError("point is not on the lattice")
        return lv.astype(int)

    def lift(self, x) -> np.ndarray:
        """Staircase encoding: block i is 1^l 0^(M-l) for x_i = l/M."""
        lv = self.levels(x)
        bits = np.zeros((self.n, self.m))
        cols = np.arange(1, self.m + 1)
        bits[cols[None, :] <= lv[:, None]] = 1.0
        return bits.ravel()

    def unlift(self, bits) -> np.ndarray:
        """Inverse of lift; rejects non-staircase blocks."""
        blocks = self._blocks(bits)
        if not self._is_staircase(blocks, integral=True):
            raise LatticeError("bit vector is not a 0/1 staircase")
        return blocks.sum(axis=1) / self.m

    def lift_reward(self, a) -> np.ndarray:
        """Block-constant reward a_i / M so that <a, x> = <lifted, lift(x)>."""
        a = np.asarray(a, dtype=float)
        if a.shape != (self.n,):
            raise LatticeError(f"reward vector of dimension {self.n} expected")
        return np.repeat(a / self.m, self.m)

    def _blocks(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        if z.shape != (self.lifted_dim,):
            raise LatticeError(f"lifted vector of dimension {self.lifted_dim} expected")
        return z.reshape(self.n, self.m)

    def _is_staircase(self, blocks, integral: bool, tol: float = LATTICE_TOL) -> bool:
        if np.any(blocks < -tol) or np.any(blocks > 1 + tol):
            return False
        if integral and np.any(np.abs(blocks - np.rint(blocks)) > tol):
            return False
        if self.m > 1 and np.any(np.diff(blocks, axis=1) > tol):
            return False
        return True

    def is_staircase(self, z, integral: bool = False, tol: float = LATTICE_TOL) -> bool:
        return self._is_staircase(self._blocks(z), integral=integral, tol=tol)

    def enumerate_points(self, body=None) -> np.ndarray:
        """All lattice points, optionally filtered by a body (small n only)."""
        axes = [np.arange(self.m + 1) / self.m] * self.n
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.n)
        if body is not None:
            grid = grid[body.contains_batch(grid)]
        return grid


class LiftedBody:
    """The staircase polytope carrying a base body's constraints.

    Supplies integral vertex maximization (exact for hypercube and unit-cost
    budget bases), relaxed membership, and -- for the hypercube base, whose
    relaxation has exactly the staircase vertices -- Euclidean projection.
    """

    def __init__(self, lattice: UnaryLattice, base):
        self.lattice = lattice
        self.base = base
        if base.n != lattice.n:
            raise LatticeError("lattice and base dimensions differ")
        if base.kind == "hypercube":
            self.increment_budget = None
        elif base.kind == "budget" and np.allclose(base.costs, 1.0):
            self.increment_budget = int(math.floor(base.limit * lattice.m + LATTICE_TOL))
        else:
            raise UnsupportedLiftedBase(
                "exact lifted optimization supports hypercube and unit-cost budget bases; "
                f"got kind={base.kind!r}")
        self.dimension = lattice.lifted_dim
        self.diameter = float(np.sqrt(self.dimension))

    # -- oracles used by the inner online-linear machinery -------------------

    def contains(self, z, tol: float = LATTICE_TOL) -> bool:
        """Relaxed membership: staircase blocks whose means satisfy the base."""
        blocks = self.lattice._blocks(z)
        if not self.lattice._is_staircase(blocks, integral=False, tol=tol):
            return False
        return self.base.contains(np.clip(blocks.mean(axis=1), 0.0, 1.0), tol=tol)

    def min_inf_norm_point(self) -> np.ndarray:
        return np.zeros(self.dimension)

    def linear_maximize(self, w) -> np.ndarray:
        return self.vertex_maximize(w)

    def vertex_maximize(self, w) -> np.ndarray:
        """Best integral staircase point for <w, .>; ties prefer shorter blocks.

        Hypercube base: per-block best prefix sum.  Budget base: exact
        dynamic program over ordered prefix increments under the integer
        increment budget (plain greedy is not exact when later increments in
        a block outweigh earlier negative ones).
        """
        w = np.asarray(w, dtype=float)
        prefix = np.concatenate(
            [np.zeros((self.lattice.n, 1)), np.cumsum(w.reshape(self.lattice.n, self.lattice.m), axis=1)],
            axis=1)
        if self.increment_budget is None:
            lengths = np.argmax(prefix, axis=1)  # first max: smallest prefix wins ties
        else:
            lengths = self._budget_dp(prefix)
        bits = np.zeros((self.lattice.n, self.lattice.m))
        cols = np.arange(1, self.lattice.m + 1)
        bits[cols[None, :] <= lengths[:, None]] = 1.0
        return bits.ravel()

    def _budget_dp(self, prefix) -> np.ndarray:
        n, m, cap = self.lattice.n, self.lattice.m, self.increment_budget
        cap = min(cap, n * m)
        best = np.zeros(cap + 1)
        choices = np.zeros((n, cap + 1), dtype=int)
        for i in range(n):
            cand = np.full((cap + 1, m + 1), -np.inf)
            for length in range(min(m, cap) + 1):
                cand[length:, length] = best[: cap + 1 - length] + prefix[i, length]
            choices[i] = np.argmax(cand, axis=1)  # first max: smallest block on ties
            best = np.max(cand, axis=1)
        lengths = np.zeros(n, dtype=int)
        budget = cap
        for i in range(n - 1, -1, -1):
            lengths[i] = choices[i, budget]
            budget -= lengths[i]
        return lengths

    def project(self, z) -> np.ndarray:
        """Projection onto the relaxed staircase body (hypercube base only).

        Per block this is bounded antitonic regression: pool-adjacent
        violators followed by clipping to [0,1] is exact for constant bounds.
        """
        if self.increment_budget is not None:
            raise UnsupportedLiftedBase(
                "projection onto the lifted budget body is not supported; "
                "use the perturbed-leader strategy, which needs only linear maximization")
        blocks = self.lattice._blocks(z).copy()
        for i in range(self.lattice.n):
            blocks[i] = isotonic_regression(blocks[i], increasing=False).x
        return np.clip(blocks, 0.0, 1.0).ravel()


# ---------------------------------------------------------------------------
# approximate decomposition rounding
# ---------------------------------------------------------------------------

def caratheodory_decompose(body: LiftedBody, y, epsilon: float,
                           constant: float = 16.0) -> tuple[list[np.ndarray], np.ndarray, float]:
    """Express y (approximately) as a uniform average of staircase vertices.

    Runs k = ceil(constant / epsilon^2) Frank-Wolfe steps on min ||y - z||^2
    with the exact vertex oracle, collecting the visited vertices; the
    running iterate with steps 1/(j+1) is exactly their mean.  Returns
    (vertices, mean, achieved gap); raises RoundingError when the gap
    exceeds epsilon, which signals epsilon too small for the step budget.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    y = np.asarray(y, dtype=float)
    if not body.contains(y, tol=1e-7):
        raise LatticeError("point to decompose is not in the relaxed lifted body")
    k = int(math.ceil(constant / epsilon ** 2))
    z = np.zeros_like(y)
    vertices: list[np.ndarray] = []
    for j in range(k):
        v = body.vertex_maximize(y - z)
        vertices.append(v)
        z = z + (v - z) / (j + 1)
        if float(np.linalg.norm(z - y)) <= 1e-12:
            break
    gap = float(np.linalg.norm(z - y))
    if gap > epsilon:
        raise RoundingError(
            f"decomposition gap {gap:.3e} exceeds epsilon {epsilon:.3e} after {len(vertices)} steps")
    return vertices, z, gap


def caratheodory_round(body: LiftedBody, y, epsilon: float, rng,
                       constant: float = 16.0) -> np.ndarray:
    """Sample one vertex of the decomposition uniformly; its expectation is
    the vertex mean, which sits within epsilon of y."""
    vertices, _, _ = caratheodory_decompose(body, y, epsilon, constant)
    rng = make_rng(rng)
    return vertices[int(rng.integers(len(vertices)))].copy()


# ---------------------------------------------------------------------------
# the online vee-learning oracle
# ---------------------------------------------------------------------------

class VeeOracle:
    """Online learner for rewards <a, c v x> over a down-closed base body.

    Plays lattice points of the base; internally runs an online linear
    oracle over the lifted body on the transformed rewards
    lift_reward(a) * (1 - lift(snap(c))) and rounds relaxed iterates back to
    staircase vertices.  The inner strategy defaults to ascent for hypercube
    bases and perturbed-leader (projection-free) for budget bases.
    """

    def __init__(self, base, horizon: int | None = None, granularity: int | None = None,
                 strategy: str = "auto", epsilon: float | None = None,
                 rounding_constant: float = 16.0, reward_scale: float | None = None,
                 rng=None, initial_point=None, record: bool = True):
        if not base.down_closed:
            raise ValueError("vee learning requires a down-closed base body")
        if granularity is None:
            if horizon is None:
                raise ValueError("provide a horizon or an explicit granularity")
            granularity = default_granularity(horizon, base.n)
        self.lattice = UnaryLattice(base.n, granularity)
        self.body = LiftedBody(self.lattice, base)
        self.base = base
        if strategy == "auto":
            strategy = "ascent" if self.body.increment_budget is None else "perturbed-leader"
        if strategy == "ascent" and self.body.increment_budget is not None:
            raise UnsupportedLiftedBase(
                "ascent needs projection onto the lifted body, unavailable for budget bases; "
                "use the perturbed-leader strategy")
        self.strategy = strategy
        self.epsilon = epsilon if epsilon is not None else (
            1.0 / math.sqrt(horizon) if horizon else 0.05)
        self.rounding_constant = rounding_constant
        self.rng = make_rng(0 if rng is None else rng)
        x1 = np.zeros(base.n) if initial_point is None else np.asarray(initial_point, dtype=float)
        if not base.contains(x1):
            raise ValueError("initial point must be feasible")
        self._x = self.lattice.snap(x1)
        start_bits = self.lattice.lift(self._x)
        if strategy == "ascent":
            self.inner = OnlineGradientAscent(self.body, initial_point=start_bits, record=False)
        elif strategy == "perturbed-leader":
            self.inner = FollowPerturbedLeader(
                self.body, horizon=horizon, reward_scale=reward_scale,
                rng=self.rng.spawn(1)[0], initial_point=start_bits, record=False)
        else:
            raise ValueError(f"unknown strategy {strategy!r}")
        self.inner.play()  # the initial iterate doubles as the first inner play
        self.round = 0
        self.record = record
        self.plays: list[np.ndarray] = []
        self.realized: list[float] = []
        self._awaiting_feedback = False
        self._cache_key: bytes | None = None
        self._cache_vertices: list[np.ndarray] | None = None

    def play(self) -> np.ndarray:
        """The lattice point fixed at the end of the previous round."""
        if self._awaiting_feedback:
            raise ProtocolError("play() called twice without feedback")
        self._awaiting_feedback = True
        if self.record:
            self.plays.append(self._x.copy())
        return self._x.copy()

    def feedback(self, c, a) -> float:
        """Consume the revealed context c and reward vector a.

        Returns the realized reward <a, c v x_t> and prepares the next play
        by updating the inner oracle and rounding its iterate.
        """
        if not self._awaiting_feedback:
            raise ProtocolError("feedback() without a preceding play")
        c = np.asarray(c, dtype=float)
        a = np.asarray(a, dtype=float)
        realized = float(a @ np.maximum(c, self._x))
        snapped = self.lattice.snap(c)
        context_bits = self.lattice.lift(snapped)
        self.inner.feedback(self.lattice.lift_reward(a) * (1.0 - context_bits))
        iterate = self.inner.play()
        self._x = self._round_iterate(iterate)
        if not self.base.contains(self._x):
            raise RuntimeError("internal error: rounded play left the base body")
        self.round += 1
        self._awaiting_feedback = False
        if self.record:
            self.realized.append(realized)
        return realized

    def _round_iterate(self, iterate: np.ndarray) -> np.ndarray:
        if self.lattice.is_staircase(iterate, integral=True):
            return self.lattice.unlift(np.rint(iterate))
        key = iterate.tobytes()
        if key != self._cache_key:
            self._cache_vertices, _, _ = caratheodory_decompose(
                self.body, iterate, self.epsilon, self.rounding_constant)
            self._cache_key = key
        choice = self._cache_vertices[int(self.rng.integers(len(self._cache_vertices)))]
        return self.lattice.unlift(choice)
