"""Binary-expansion lifting of the cube and the discrete-oracle engine.

A lattice coordinate in {0, 2^-M, ..., 1} has a unique expansion
x_i = sum_j 2^-j y_ij over ground elements (i, j), j = 0..M, so a continuous
objective on the cube induces a set function on n(M+1) elements that is
submodular whenever the objective is DR-submodular.  The engine feeds those
set functions to a pluggable online discrete-submodular oracle and unlifts
its subsets as the next play.  The baseline oracle shipped here is
follow-the-leader over the accumulated set functions, solved per round by
randomized double greedy; it is a documented substitute, not a
regret-optimal algorithm, and the interface accepts stronger oracles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .functions import DRFunction
from .oracles import ProtocolError
from .rng import make_rng

BINARY_TOL = 1e-9


class BinaryLatticeError(ValueError):
    """Off-lattice point or indicator outside the encoding's image."""


def default_binary_granularity(horizon: int) -> int:
    """Expansion depth ceil(log2 T), floored at 1."""
    return max(1, math.ceil(math.log2(max(horizon, 2))))


class BinaryLattice:
    """The grid {0, 2^-M, ..., 1}^n with ground set (i, j), weight 2^-j."""

    def __init__(self, n: int, depth: int):
        if depth < 1:
            raise BinaryLatticeError("depth must be a positive integer")
        self.n = int(n)
        self.m = int(depth)
        self.block = self.m + 1
        self.element_weights = 2.0 ** -np.arange(self.block)

    @property
    def ground_size(self) -> int:
        return self.n * self.block

    def levels(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        scaled = x * (1 << self.m)
        lv = np.rint(scaled)
        if np.any(np.abs(lv - scaled) > BINARY_TOL) or np.any(lv < 0) or np.any(lv > (1 << self.m)):
            raise BinaryLatticeError("point is not on the binary lattice")
        return lv.astype(int)

    def lift(self, x) -> np.ndarray:
        """Indicator of the unique expansion; x_i = 1 maps to the j=0 element."""
        lv = self.levels(x)
        bits = np.zeros((self.n, self.block), dtype=bool)
        full = 1 << self.m
        for i, v in enumerate(lv):
            if v == full:
                bits[i, 0] = True
            else:
                for j in range(1, self.block):
                    bits[i, j] = bool((v >> (self.m - j)) & 1)
        return bits.ravel()

    def unlift(self, indicator) -> np.ndarray:
        """Inverse on the image; indicators with block value > 1 are rejected."""
        vals = self.block_values(indicator)
        if np.any(vals > 1.0 + BINARY_TOL):
            raise BinaryLatticeError("indicator block exceeds value 1: outside the image")
        return vals

    def block_values(self, indicator) -> np.ndarray:
        indicator = np.asarray(indicator)
        if indicator.shape != (self.ground_size,):
            raise BinaryLatticeError(f"indicator of length {self.ground_size} expected")
        return indicator.reshape(self.n, self.block).astype(float) @ self.element_weights

    def lattice_point(self, indicator) -> np.ndarray:
        """Block values capped at 1: total on all subsets, exact on the image."""
        return np.minimum(self.block_values(indicator), 1.0)

    def is_valid(self, indicator) -> bool:
        return bool(np.all(self.block_values(indicator) <= 1.0 + BINARY_TOL))

    def enumerate_points(self) -> np.ndarray:
        """All (2^M + 1)^n lattice points (small n only)."""
        axis = np.arange((1 << self.m) + 1) / (1 << self.m)
        grid = np.meshgrid(*([axis] * self.n), indexing="ij")
        return np.stack(grid, axis=-1).reshape(-1, self.n)


class SetFunctionView:
    """Evaluate a continuous objective through the binary encoding.

    Calls accept arbitrary indicator vectors; block values are capped at 1,
    which matches the encoding exactly on its image and stays inside the
    cube elsewhere.  Views over the same lattice add by adding the
    underlying objectives (closed-form when the family supports it).
    """

    def __init__(self, fn: DRFunction, lattice: BinaryLattice):
        if fn.n != lattice.n:
            raise BinaryLatticeError("objective and lattice dimensions differ")
        self.fn = fn
        self.lattice = lattice

    def __call__(self, indicator) -> float:
        return float(self.fn.value(self.lattice.lattice_point(indicator)))

    def __add__(self, other):
        if not isinstance(other, SetFunctionView):
            return NotImplemented
        if other.lattice.n != self.lattice.n or other.lattice.m != self.lattice.m:
            raise BinaryLatticeError("views disagree on the lattice")
        return SetFunctionView(self.fn + other.fn, self.lattice)


@dataclass
class SubmodularityReport:
    max_violation: float
    chains_checked: int
    exhaustive: bool

    @property
    def passed(self) -> bool:
        return self.max_violation <= 1e-8


def _valid_block_patterns(block: int) -> list[int]:
    """Bitmasks of one block whose value stays <= 1: the j=0 singleton or any
    subset of the fractional elements."""
    patterns = [1]  # element j=0 alone (value exactly 1)
    for mask in range(1 << (block - 1)):
        patterns.append(mask << 1)
    return sorted(set(patterns))


def submodularity_bruteforce(view: SetFunctionView, rng=None, samples: int = 2000) -> SubmodularityReport:
    """Largest violation of the marginal-gain inequality over encoding-valid chains.

    Checks f(T + k) - f(T) <= f(S + k) - f(S) for S contained in T and k
    outside T, restricted to indicator sets whose blocks stay within the
    encoding's image (where the lifted function is exactly submodular).
    Exhaustive up to 12 ground elements, sampled up to 20.
    """
    lattice = view.lattice
    size = lattice.ground_size
    if size > 20:
        raise ValueError("ground set too large; submodularity check supports <= 20 elements")
    cache: dict[int, float] = {}

    def as_indicator(mask: int) -> np.ndarray:
        return np.array([(mask >> b) & 1 for b in range(size)], dtype=bool)

    def value(mask: int) -> float:
        if mask not in cache:
            cache[mask] = view(as_indicator(mask))
        return cache[mask]

    block_masks = []
    for i in range(lattice.n):
        shift = i * lattice.block
        block_masks.append([p << shift for p in _valid_block_patterns(lattice.block)])

    valid_sets = [0]
    for masks in block_masks:
        valid_sets = [s | m for s in valid_sets for m in masks]
    valid_lookup = set(valid_sets)

    worst = -np.inf
    checked = 0
    exhaustive = size <= 12
    if exhaustive:
        for t_mask in valid_sets:
            for s_mask in valid_sets:
                if s_mask & ~t_mask:
                    continue
                for k in range(size):
                    bit = 1 << k
                    if t_mask & bit:
                        continue
                    if (t_mask | bit) not in valid_lookup or (s_mask | bit) not in valid_lookup:
                        continue
                    gap = (value(t_mask | bit) - value(t_mask)) - (value(s_mask | bit) - value(s_mask))
                    worst = max(worst, gap)
                    checked += 1
    else:
        rng = make_rng(0 if rng is None else rng)
        order = np.array(valid_sets)
        for _ in range(samples):
            t_mask = int(order[rng.integers(len(order))])
            subsets = [m for m in valid_sets if not (m & ~t_mask)]
            s_mask = int(subsets[rng.integers(len(subsets))])
            k_choices = [k for k in range(size)
                         if not (t_mask >> k) & 1
                         and (t_mask | (1 << k)) in valid_lookup
                         and (s_mask | (1 << k)) in valid_lookup]
            if not k_choices:
                continue
            k = int(k_choices[rng.integers(len(k_choices))])
            bit = 1 << k
            gap = (value(t_mask | bit) - value(t_mask)) - (value(s_mask | bit) - value(s_mask))
            worst = max(worst, gap)
            checked += 1
    return SubmodularityReport(float(worst), checked, exhaustive)


# ---------------------------------------------------------------------------
# discrete maximization
# ---------------------------------------------------------------------------

def double_greedy(f, ground_size: int, rng) -> np.ndarray:
    """Randomized double-greedy sweep for unconstrained submodular maximization.

    Maintains a growing set A and a shrinking set B; element e joins A with
    probability a/(a+b) for the clipped marginals a = [f(A+e) - f(A)]_+ and
    b = [f(B-e) - f(B)]_+, and deterministically when both marginals vanish.
    Queried values must be non-negative.
    """
    rng = make_rng(rng)
    lower = np.zeros(ground_size, dtype=bool)
    upper = np.ones(ground_size, dtype=bool)
    f_lower = float(f(lower))
    f_upper = float(f(upper))
    for value in (f_lower, f_upper):
        if value < -1e-9:
            raise ValueError("double greedy requires non-negative function values")
    for e in range(ground_size):
        with_e = lower.copy()
        with_e[e] = True
        without_e = upper.copy()
        without_e[e] = False
        f_with = float(f(with_e))
        f_without = float(f(without_e))
        if min(f_with, f_without) < -1e-9:
            raise ValueError("double greedy requires non-negative function values")
        a = max(f_with - f_lower, 0.0)
        b = max(f_without - f_upper, 0.0)
        include = True if a + b <= 0.0 else bool(rng.random() < a / (a + b))
        if include:
            lower, f_lower = with_e, f_with
        else:
            upper, f_upper = without_e, f_without
    return lower


class DiscreteOracle:
    """Online contract for discrete submodular maximization over a ground set.

    feedback(view) reveals the round's set function; play() then returns the
    indicator to use next round.  A regret-optimal randomized algorithm can
    be plugged in here; the baseline below makes no regret promise.
    """

    def __init__(self, ground_size: int):
        self.ground_size = int(ground_size)

    def feedback(self, view) -> None:
        raise NotImplementedError

    def play(self) -> np.ndarray:
        raise NotImplementedError


class BaselineDiscreteOracle(DiscreteOracle):
    """Follow-the-leader: double greedy on the sum of past set functions.

    Uses a fresh random substream per round; evaluates the accumulated view
    lazily (views add through their objectives, so no value table is built).
    """

    def __init__(self, ground_size: int, rng=None):
        super().__init__(ground_size)
        self.rng = make_rng(0 if rng is None else rng)
        self.total = None
        self.rounds_seen = 0

    def feedback(self, view) -> None:
        self.total = view if self.total is None else self.total + view
        self.rounds_seen += 1

    def play(self) -> np.ndarray:
        if self.total is None:
            raise ProtocolError("play() before any feedback")
        return double_greedy(self.total, self.ground_size, self.rng.spawn(1)[0])


class HypercubeEngine:
    """Online maximization over the full cube via the binary encoding.

    Plays the lattice point fixed at the end of the previous round; on
    feedback it lifts the revealed objective to a set function, updates the
    discrete oracle, and unlifts the oracle's next subset.
    """

    def __init__(self, n: int, horizon: int | None = None, depth: int | None = None,
                 oracle: DiscreteOracle | None = None, rng=None, initial_point=None):
        if depth is None:
            if horizon is None:
                raise ValueError("provide a horizon or an explicit depth")
            depth = default_binary_granularity(horizon)
        self.lattice = BinaryLattice(n, depth)
        self.rng = make_rng(0 if rng is None else rng)
        self.oracle = oracle if oracle is not None else BaselineDiscreteOracle(
            self.lattice.ground_size, rng=self.rng.spawn(1)[0])
        self._x = (np.zeros(n) if initial_point is None
                   else np.asarray(initial_point, dtype=float).copy())
        self.lattice.levels(self._x)  # initial play must be on the lattice
        self.round = 0
        self.plays: list[np.ndarray] = []
        self.rewards: list[float] = []
        self._awaiting_feedback = False

    def play(self) -> np.ndarray:
        if self._awaiting_feedback:
            raise ProtocolError("play() called twice without feedback")
        self._awaiting_feedback = True
        self.plays.append(self._x.copy())
        return self._x.copy()

    def feedback(self, fn: DRFunction) -> float:
        if not self._awaiting_feedback:
            raise ProtocolError("feedback() without a preceding play")
        reward = float(fn.value(self._x))
        self.rewards.append(reward)
        self.oracle.feedback(SetFunctionView(fn, self.lattice))
        indicator = self.oracle.play()
        self._x = self.lattice.lattice_point(indicator)
        self.round += 1
        self._awaiting_feedback = False
        return reward
