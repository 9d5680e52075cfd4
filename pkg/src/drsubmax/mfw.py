"""Meta-Frank-Wolfe engines for down-closed and general convex sets.

Each round runs L conditional-gradient steps whose directions come from L
independent online oracles (vee oracles on down-closed sets, plain linear
oracles on general sets).  Gradient estimates at the per-level iterates are
averaged through a momentum recurrence before being fed back as oracle
rewards, which keeps the effective gradient error decaying in the level
index even under stochastic noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .functions import DRFunction
from .instances import noisy_gradient
from .lift import VeeOracle
from .oracles import ProtocolError, make_linear_oracle
from .rng import make_rng

KAPPA = math.log(3.0) / 2.0
INVARIANT_SLACK = 1e-12


def momentum_weights(levels: int, offset: int = 3) -> np.ndarray:
    """The averaging weights 2/(l+offset)^(2/3) for l = 1..levels."""
    ell = np.arange(1, levels + 1, dtype=float)
    return 2.0 / (ell + offset) ** (2.0 / 3.0)


@dataclass(frozen=True)
class StepSchedule:
    """Per-level step sizes (etas) and averaging weights (rhos)."""

    etas: np.ndarray
    rhos: np.ndarray
    kind: str = "custom"

    @property
    def levels(self) -> int:
        return len(self.etas)

    @classmethod
    def uniform(cls, levels: int) -> "StepSchedule":
        """etas = 1/L (summing to exactly 1), the down-closed schedule."""
        etas = np.full(levels, 1.0 / levels)
        return cls(etas=etas, rhos=momentum_weights(levels), kind="uniform")

    @classmethod
    def harmonic(cls, levels: int, kappa: float = KAPPA) -> "StepSchedule":
        """etas = kappa/(l * H_L) (summing to exactly kappa), the general schedule."""
        ell = np.arange(1, levels + 1, dtype=float)
        h_l = float(np.sum(1.0 / ell))
        etas = kappa / (ell * h_l)
        return cls(etas=etas, rhos=momentum_weights(levels), kind="harmonic")


class GradientAverager:
    """d_l = (1 - rho_l) d_{l-1} + rho_l g_l, reset to d_0 = 0 each round."""

    def __init__(self, rhos: np.ndarray):
        self.rhos = np.asarray(rhos, dtype=float)
        if np.any(self.rhos <= 0) or np.any(self.rhos >= 1):
            raise ValueError("averaging weights must lie in (0, 1)")
        self.reset()

    def reset(self) -> None:
        self._d = None
        self._level = 0

    def update(self, g) -> np.ndarray:
        g = np.asarray(g, dtype=float)
        if self._level >= len(self.rhos):
            raise ValueError("more updates than configured levels")
        rho = self.rhos[self._level]
        self._d = rho * g if self._d is None else (1.0 - rho) * self._d + rho * g
        self._level += 1
        return self._d.copy()


def default_levels_down_closed(horizon: int, cap: int = 64) -> int:
    return min(math.ceil(horizon ** 0.75), cap)


def default_levels_general(horizon: int, cap: int = 64) -> int:
    return min(horizon, cap)


@dataclass
class RoundTrace:
    """Per-level iterates and oracle outputs of one round (tracing only)."""

    level_points: np.ndarray     # (L+1, n): x_1 .. x_{L+1}
    oracle_outputs: np.ndarray   # (L, n): the direction sources u_l / v_l


class _EngineBase:
    """Shared play/feedback bookkeeping for both engines."""

    def __init__(self, body, schedule: StepSchedule, sigma: float, rng, record_levels: bool):
        self.body = body
        self.schedule = schedule
        self.sigma = float(sigma)
        self.rng = make_rng(0 if rng is None else rng)
        self.record_levels = record_levels
        self.round = 0
        self.plays: list[np.ndarray] = []
        self.rewards: list[float] = []
        self.traces: list[RoundTrace] = []
        self._level_points: np.ndarray | None = None
        self._averager = GradientAverager(schedule.rhos)

    @property
    def levels(self) -> int:
        return self.schedule.levels

    def play(self) -> np.ndarray:
        if self._level_points is not None:
            raise ProtocolError("play() called twice without feedback")
        pts, outputs = self._build_round()
        self._level_points = pts
        x = pts[-1]
        if not self.body.contains(x, tol=1e-7):
            raise RuntimeError("internal error: engine iterate left the body")
        self.plays.append(x.copy())
        if self.record_levels:
            self.traces.append(RoundTrace(pts.copy(), outputs.copy()))
        return x.copy()

    def feedback(self, fn: DRFunction) -> float:
        if self._level_points is None:
            raise ProtocolError("feedback() without a preceding play")
        pts = self._level_points
        reward = float(fn.value(pts[-1]))
        self._averager.reset()
        for level in range(self.levels):
            g = noisy_gradient(fn, pts[level], self.sigma, self.rng)
            d = self._averager.update(g)
            self._feed_oracle(level, pts[level], d)
        self.rewards.append(reward)
        self.round += 1
        self._level_points = None
        return reward

    def _build_round(self) -> np.ndarray:
        raise NotImplementedError

    def _feed_oracle(self, level: int, point: np.ndarray, d: np.ndarray) -> None:
        raise NotImplementedError


class MetaFrankWolfeDownClosed(_EngineBase):
    """Down-closed engine: vee directions x v u - x from L vee oracles.

    Starts every round at the origin; since the final iterate is dominated
    by a convex combination of oracle plays, down-closedness keeps it
    feasible.  Enforces the per-level headroom invariant
    1 - ||x_{l+1}||_inf >= prod_{l' <= l} (1 - eta_{l'}).
    """

    def __init__(self, body, horizon: int, levels: int | None = None, sigma: float = 0.0,
                 schedule: StepSchedule | None = None, oracle_strategy: str = "auto",
                 granularity: int | None = None, epsilon: float | None = None,
                 rounding_constant: float = 16.0, reward_scale: float | None = None,
                 rng=None, record_levels: bool = False):
        if not body.down_closed:
            raise ValueError("this engine requires a down-closed body")
        levels = levels if levels is not None else default_levels_down_closed(horizon)
        schedule = schedule if schedule is not None else StepSchedule.uniform(levels)
        if schedule.levels != levels:
            raise ValueError("schedule length does not match the level count")
        super().__init__(body, schedule, sigma, rng, record_levels)
        children = self.rng.spawn(levels)
        self.oracles = [
            VeeOracle(body, horizon=horizon, granularity=granularity,
                      strategy=oracle_strategy, epsilon=epsilon,
                      rounding_constant=rounding_constant, reward_scale=reward_scale,
                      rng=children[i], record=False)
            for i in range(levels)
        ]
        self.granularity = self.oracles[0].lattice.m
        self.oracle_strategy = self.oracles[0].strategy
        self.epsilon = self.oracles[0].epsilon

    def _build_round(self) -> tuple[np.ndarray, np.ndarray]:
        n = self.body.n
        pts = np.zeros((self.levels + 1, n))
        outputs = np.zeros((self.levels, n))
        headroom = 1.0
        for level, eta in enumerate(self.schedule.etas):
            u = self.oracles[level].play()
            outputs[level] = u
            x = pts[level]
            pts[level + 1] = x + eta * (np.maximum(x, u) - x)
            headroom *= 1.0 - eta
            if 1.0 - float(np.max(pts[level + 1])) < headroom - INVARIANT_SLACK:
                raise RuntimeError("internal error: headroom invariant violated")
        return pts, outputs

    def _feed_oracle(self, level: int, point: np.ndarray, d: np.ndarray) -> None:
        self.oracles[level].feedback(point, d)


class MetaFrankWolfeGeneral(_EngineBase):
    """General-set engine: convex-combination steps toward linear-oracle plays.

    Starts every round at the minimum infinity-norm point of the body and
    uses the harmonic step schedule, preserving per-coordinate headroom
    1 - x_{l+1,i} >= prod(1 - eta) * (1 - x_{1,i}).
    """

    def __init__(self, body, horizon: int, levels: int | None = None, sigma: float = 0.0,
                 schedule: StepSchedule | None = None, oracle_strategy: str = "ascent",
                 reward_scale: float | None = None, rng=None, record_levels: bool = False):
        levels = levels if levels is not None else default_levels_general(horizon)
        schedule = schedule if schedule is not None else StepSchedule.harmonic(levels)
        if schedule.levels != levels:
            raise ValueError("schedule length does not match the level count")
        super().__init__(body, schedule, sigma, rng, record_levels)
        self.start = body.min_inf_norm_point()
        children = self.rng.spawn(levels)
        self.oracles = [
            make_linear_oracle(oracle_strategy, body, horizon=horizon, rng=children[i],
                               reward_scale=reward_scale, record=True)
            for i in range(levels)
        ]
        self.oracle_strategy = oracle_strategy

    def _build_round(self) -> tuple[np.ndarray, np.ndarray]:
        n = self.body.n
        pts = np.zeros((self.levels + 1, n))
        outputs = np.zeros((self.levels, n))
        pts[0] = self.start
        shrink = 1.0
        for level, eta in enumerate(self.schedule.etas):
            v = self.oracles[level].play()
            outputs[level] = v
            pts[level + 1] = (1.0 - eta) * pts[level] + eta * v
            shrink *= 1.0 - eta
            floor = shrink * (1.0 - pts[0]) - INVARIANT_SLACK
            if np.any(1.0 - pts[level + 1] < floor):
                raise RuntimeError("internal error: per-coordinate headroom violated")
        return pts, outputs

    def _feed_oracle(self, level: int, point: np.ndarray, d: np.ndarray) -> None:
        self.oracles[level].feedback(d)


ENGINES = {
    "down-closed": MetaFrankWolfeDownClosed,
    "general": MetaFrankWolfeGeneral,
}


@dataclass
class PhaseInfo:
    start: int  # 1-based first round of the phase
    end: int    # 1-based last round (inclusive)
    levels: int
    horizon: int


@dataclass
class DoublingResult:
    plays: list[np.ndarray] = field(default_factory=list)
    rewards: list[float] = field(default_factory=list)
    phases: list[PhaseInfo] = field(default_factory=list)


def doubling_run(algorithm: str, body, functions, rng=None, **engine_kwargs) -> DoublingResult:
    """Run an engine without knowing the horizon via doubling restarts.

    Phase m covers rounds [2^m, 2^(m+1) - 1] (round 1 belongs to phase 0, so
    every round is assigned exactly once) with a fresh engine of horizon 2^m
    and 2^(m+1) levels; the final phase truncates at stream end.
    """
    if algorithm not in ENGINES:
        raise ValueError(f"unknown algorithm {algorithm!r}")
    rng = make_rng(0 if rng is None else rng)
    functions = list(functions)
    total = len(functions)
    result = DoublingResult()
    t = 1
    phase = 0
    while t <= total:
        horizon = 1 << phase
        levels = 1 << (phase + 1)
        end = min(2 * horizon - 1, total)
        engine = ENGINES[algorithm](body, horizon=horizon, levels=levels,
                                    rng=rng.spawn(1)[0], **engine_kwargs)
        for round_idx in range(t, end + 1):
            x = engine.play()
            reward = engine.feedback(functions[round_idx - 1])
            result.plays.append(x)
            result.rewards.append(reward)
        result.phases.append(PhaseInfo(start=t, end=end, levels=levels, horizon=horizon))
        t = end + 1
        phase += 1
    return result
