"""Online linear optimization oracles with a strict play/feedback protocol.

Two strategies are provided: projected online gradient ascent (needs a
projection oracle on the body) and follow-the-perturbed-leader (needs only
linear maximization, hence works on bodies where projection is unavailable).
Both enforce one feedback per play and replay deterministically under a
fixed seed.
"""

from __future__ import annotations

import numpy as np

from .rng import make_rng


class ProtocolError(RuntimeError):
    """Play/feedback alternation violated."""


def olo_regret(plays, rewards, body) -> float:
    """Regret of a play sequence against the best fixed point in hindsight.

    The comparator maximizes the summed reward vector via the body's linear
    oracle; with matching lengths the result is the comparator's total reward
    minus the oracle's realized total.
    """
    plays = [np.asarray(p, dtype=float) for p in plays]
    rewards = [np.asarray(r, dtype=float) for r in rewards]
    if len(plays) != len(rewards):
        raise ValueError("plays and rewards must have equal length")
    if not plays:
        return 0.0
    total = np.sum(rewards, axis=0)
    comparator = body.linear_maximize(total)
    realized = float(sum(r @ p for r, p in zip(rewards, plays)))
    return float(total @ comparator) - realized


class LinearOracle:
    """Shared state machine: feasible plays, alternation, reward history."""

    def __init__(self, body, record: bool = True):
        self.body = body
        self.dim = body.dimension if hasattr(body, "dimension") else body.n
        self.round = 0
        self.record = record
        self.plays: list[np.ndarray] = []
        self.rewards: list[np.ndarray] = []
        self._awaiting_feedback = False

    def play(self) -> np.ndarray:
        if self._awaiting_feedback:
            raise ProtocolError("play() called twice without feedback")
        x = self._next_play()
        self._awaiting_feedback = True
        if self.record:
            self.plays.append(x.copy())
        return x

    def feedback(self, d) -> None:
        if not self._awaiting_feedback:
            raise ProtocolError("feedback() without a preceding play")
        d = np.asarray(d, dtype=float)
        if d.shape != (self.dim,):
            raise ValueError(f"reward vector of dimension {self.dim} expected")
        self.round += 1
        if self.record:
            self.rewards.append(d.copy())
        self._apply_feedback(d)
        self._awaiting_feedback = False

    def regret(self) -> float:
        if not self.record:
            raise RuntimeError("history recording disabled")
        k = min(len(self.plays), len(self.rewards))
        return olo_regret(self.plays[:k], self.rewards[:k], self.body)

    def _next_play(self) -> np.ndarray:
        raise NotImplementedError

    def _apply_feedback(self, d) -> None:
        raise NotImplementedError


class OnlineGradientAscent(LinearOracle):
    """Projected ascent on the reward: state <- Proj(state + (c/sqrt(t)) d).

    The step scale c defaults to diameter / ||first reward|| when not given,
    the usual D/G tuning; the starting point is the body's minimum
    infinity-norm point unless overridden.
    """

    def __init__(self, body, step_scale: float | None = None, initial_point=None,
                 record: bool = True):
        super().__init__(body, record=record)
        self.step_scale = step_scale
        self._state = (np.asarray(initial_point, dtype=float).copy()
                       if initial_point is not None else body.min_inf_norm_point())

    def _next_play(self) -> np.ndarray:
        return self._state.copy()

    def _apply_feedback(self, d) -> None:
        if self.step_scale is None:
            diameter = getattr(self.body, "diameter", np.sqrt(self.dim))
            self.step_scale = diameter / max(float(np.linalg.norm(d)), 1e-12)
        eta = self.step_scale / np.sqrt(self.round)
        self._state = self.body.project(self._state + eta * d)


class FollowPerturbedLeader(LinearOracle):
    """Maximize cumulative reward plus per-coordinate uniform noise.

    Noise is redrawn each round from a dedicated substream on [0, amplitude],
    with amplitude = reward_scale * sqrt(horizon); an unknown horizon doubles
    through powers of two.  reward_scale defaults to the first observed
    reward's max coordinate so the perturbation matches the reward magnitude.
    Passing noise_amplitude pins the scale outright (0 gives the pure leader).
    """

    def __init__(self, body, horizon: int | None = None, noise_amplitude: float | None = None,
                 reward_scale: float | None = None, rng=None, initial_point=None,
                 record: bool = True):
        super().__init__(body, record=record)
        self.horizon = horizon
        self.noise_amplitude = noise_amplitude
        self.reward_scale = reward_scale
        self.rng = make_rng(0 if rng is None else rng)
        self.cumulative = np.zeros(self.dim)
        self._initial = (np.asarray(initial_point, dtype=float).copy()
                         if initial_point is not None else None)

    def _amplitude(self) -> float:
        if self.noise_amplitude is not None:
            return float(self.noise_amplitude)
        scale = self.reward_scale if self.reward_scale is not None else 1.0
        if self.horizon is not None:
            return scale * float(np.sqrt(self.horizon))
        phase = 1 << max(self.round, 1).bit_length()
        return scale * float(np.sqrt(phase))

    def _next_play(self) -> np.ndarray:
        if self.round == 0 and self._initial is not None:
            return self._initial.copy()
        amp = self._amplitude()
        noise = self.rng.uniform(0.0, amp, self.dim) if amp > 0 else np.zeros(self.dim)
        return self.body.linear_maximize(self.cumulative + noise)

    def _apply_feedback(self, d) -> None:
        if self.reward_scale is None:
            self.reward_scale = max(float(np.max(np.abs(d))), 1e-12)
        self.cumulative += d


ORACLE_STRATEGIES = ("ascent", "perturbed-leader")


def make_linear_oracle(strategy: str, body, *, horizon=None, rng=None,
                       step_scale=None, reward_scale=None, initial_point=None,
                       record: bool = True) -> LinearOracle:
    if strategy == "ascent":
        return OnlineGradientAscent(body, step_scale=step_scale,
                                    initial_point=initial_point, record=record)
    if strategy == "perturbed-leader":
        return FollowPerturbedLeader(body, horizon=horizon, reward_scale=reward_scale,
                                     rng=rng, initial_point=initial_point, record=record)
    raise ValueError(f"unknown oracle strategy {strategy!r}; use one of {ORACLE_STRATEGIES}")
