"""Unary lifting algebra, the lifted vertex oracle, rounding, vee learning."""

import itertools

import numpy as np
import pytest
from scipy.optimize import minimize

from drsubmax import (ConvexBody, LiftedBody, UnaryLattice, VeeOracle,
                      caratheodory_decompose, caratheodory_round)
from drsubmax.lift import (LatticeError, RoundingError, UnsupportedLiftedBase,
                           default_granularity)


def enumerate_vertices(body: LiftedBody) -> np.ndarray:
    """All integral staircase points of the lifted body, by brute force.

    Independent of the production prefix/DP oracle: enumerates every block
    length combination and filters by the base constraint.
    """
    lattice = body.lattice
    out = []
    for lengths in itertools.product(range(lattice.m + 1), repeat=lattice.n):
        x = np.array(lengths, dtype=float) / lattice.m
        if body.base.contains(x):
            out.append(lattice.lift(x))
    return np.stack(out)


class TestSnap:
    def test_floor_to_grid(self):
        lattice = UnaryLattice(2, 2)
        np.testing.assert_allclose(lattice.snap(np.array([0.49, 0.99])), [0.0, 0.5])

    def test_idempotent_on_lattice(self):
        lattice = UnaryLattice(3, 4)
        rng = np.random.default_rng(0)
        for _ in range(100):
            x = rng.integers(0, 5, 3) / 4.0
            np.testing.assert_array_equal(lattice.snap(x), x)

    def test_distance_bound_and_domination(self):
        lattice = UnaryLattice(6, 5)
        rng = np.random.default_rng(1)
        for _ in range(1000):
            c = rng.uniform(0, 1, 6)
            snapped = lattice.snap(c)
            assert np.all(snapped <= c + 1e-12)
            assert np.linalg.norm(c - snapped) <= np.sqrt(6) / 5 + 1e-12

    def test_down_closed_feasibility_preserved(self):
        body = ConvexBody.budget(4, 1.0)
        lattice = UnaryLattice(4, 3)
        rng = np.random.default_rng(2)
        for _ in range(200):
            c = body.sample(rng)
            assert body.contains(lattice.snap(c))


class TestLiftUnlift:
    def test_definitional_example(self):
        lattice = UnaryLattice(2, 2)
        np.testing.assert_array_equal(lattice.lift(np.array([0.5, 1.0])), [1, 0, 1, 1])

    def test_roundtrip_random(self):
        lattice = UnaryLattice(4, 6)
        rng = np.random.default_rng(3)
        for _ in range(1000):
            x = rng.integers(0, 7, 4) / 6.0
            np.testing.assert_array_equal(lattice.unlift(lattice.lift(x)), x)

    def test_bijective_exhaustive_small(self):
        for n, m in ((1, 4), (2, 4), (3, 3)):
            lattice = UnaryLattice(n, m)
            seen = set()
            for x in lattice.enumerate_points():
                bits = lattice.lift(x)
                seen.add(bits.tobytes())
                np.testing.assert_array_equal(lattice.unlift(bits), x)
            assert len(seen) == (m + 1) ** n

    def test_vee_commutes_with_lift(self):
        lattice = UnaryLattice(3, 4)
        rng = np.random.default_rng(4)
        for _ in range(500):
            x = rng.integers(0, 5, 3) / 4.0
            y = rng.integers(0, 5, 3) / 4.0
            np.testing.assert_array_equal(
                lattice.lift(np.maximum(x, y)),
                np.maximum(lattice.lift(x), lattice.lift(y)))

    def test_monotone_map(self):
        lattice = UnaryLattice(3, 4)
        rng = np.random.default_rng(5)
        for _ in range(300):
            x = rng.integers(0, 5, 3) / 4.0
            y = np.minimum(x, rng.integers(0, 5, 3) / 4.0)
            assert np.all(lattice.lift(y) <= lattice.lift(x))

    def test_rejections(self):
        lattice = UnaryLattice(2, 2)
        with pytest.raises(LatticeError):
            lattice.lift(np.array([0.3, 0.5]))  # off lattice
        with pytest.raises(LatticeError):
            lattice.unlift(np.array([0.0, 1.0, 1.0, 1.0]))  # staircase violated


class TestLiftReward:
    def test_definitional(self):
        lattice = UnaryLattice(2, 2)
        np.testing.assert_array_equal(lattice.lift_reward(np.array([2.0, -4.0])),
                                      [1, 1, -2, -2])

    def test_inner_product_identity(self):
        lattice = UnaryLattice(2, 2)
        a = np.array([2.0, -4.0])
        c = np.array([0.5, 1.0])
        assert a @ c == pytest.approx(-3.0)
        assert lattice.lift_reward(a) @ lattice.lift(c) == pytest.approx(-3.0)

    def test_identity_random(self):
        lattice = UnaryLattice(5, 3)
        rng = np.random.default_rng(6)
        for _ in range(1000):
            a = rng.normal(size=5)
            c = rng.integers(0, 4, 5) / 3.0
            assert abs(a @ c - lattice.lift_reward(a) @ lattice.lift(c)) < 1e-12

    def test_zero_maps_to_zero(self):
        np.testing.assert_array_equal(UnaryLattice(3, 2).lift_reward(np.zeros(3)), np.zeros(6))


class TestLiftedVertexOracle:
    def test_single_block_prefix(self):
        body = LiftedBody(UnaryLattice(1, 3), ConvexBody.hypercube(1))
        np.testing.assert_array_equal(body.vertex_maximize(np.array([2.0, -1.0, 3.0])),
                                      [1, 1, 1])

    def test_nonpositive_weights_give_zero(self):
        body = LiftedBody(UnaryLattice(2, 3), ConvexBody.hypercube(2))
        np.testing.assert_array_equal(body.vertex_maximize(-np.ones(6)), np.zeros(6))

    def test_budget_one_increment(self):
        body = LiftedBody(UnaryLattice(2, 2), ConvexBody.budget(2, 0.5))
        np.testing.assert_array_equal(
            body.vertex_maximize(np.array([5.0, 1.0, 3.0, 9.0])), [1, 0, 0, 0])

    def test_dp_handles_delayed_gains(self):
        # plain greedy would stop at the 0.5 gain; the optimum spends both
        # increments on the (-1, 10) block
        body = LiftedBody(UnaryLattice(2, 2), ConvexBody.budget(2, 1.0))
        np.testing.assert_array_equal(
            body.vertex_maximize(np.array([-1.0, 10.0, 0.5, 0.0])), [1, 1, 0, 0])

    @pytest.mark.parametrize("base", ["hypercube", "budget"])
    def test_matches_exhaustive_enumeration(self, base):
        rng = np.random.default_rng(7)
        for trial in range(40):
            n, m = int(rng.integers(1, 4)), int(rng.integers(1, 5))
            if base == "hypercube":
                body = LiftedBody(UnaryLattice(n, m), ConvexBody.hypercube(n))
            else:
                body = LiftedBody(UnaryLattice(n, m), ConvexBody.budget(n, float(rng.uniform(0.3, n))))
            w = rng.normal(size=n * m)
            got = body.vertex_maximize(w)
            assert body.lattice.is_staircase(got, integral=True)
            assert body.base.contains(body.lattice.unlift(got))
            vertices = enumerate_vertices(body)
            assert w @ got == pytest.approx(float(np.max(vertices @ w)), abs=1e-10), trial

    def test_unsupported_base_rejected(self):
        with pytest.raises(UnsupportedLiftedBase):
            LiftedBody(UnaryLattice(2, 2), ConvexBody.budget_band(2, 0.1, 1.0))
        with pytest.raises(UnsupportedLiftedBase):
            LiftedBody(UnaryLattice(2, 2), ConvexBody.budget(2, 1.0, costs=np.array([1.0, 2.0])))


class TestLiftedProjection:
    def test_matches_slsqp(self):
        body = LiftedBody(UnaryLattice(2, 3), ConvexBody.hypercube(2))
        rng = np.random.default_rng(8)
        for _ in range(20):
            z = rng.uniform(-0.3, 1.3, 6)
            got = body.project(z)
            # reference: solve the QP with a generic NLP solver
            cons = []
            for i in range(2):
                for j in range(2):
                    idx = i * 3 + j
                    cons.append({"type": "ineq",
                                 "fun": lambda v, a=idx: v[a] - v[a + 1]})
            ref = minimize(lambda v: 0.5 * np.sum((v - z) ** 2), np.clip(z, 0, 1),
                           bounds=[(0, 1)] * 6, constraints=cons, method="SLSQP")
            assert np.linalg.norm(got - ref.x) < 1e-6

    def test_budget_base_projection_refused(self):
        body = LiftedBody(UnaryLattice(2, 2), ConvexBody.budget(2, 1.0))
        with pytest.raises(UnsupportedLiftedBase, match="perturbed-leader"):
            body.project(np.zeros(4))


class TestCaratheodory:
    def test_vertex_returns_itself(self):
        body = LiftedBody(UnaryLattice(2, 3), ConvexBody.hypercube(2))
        y = body.lattice.lift(np.array([2 / 3, 1.0]))
        vertices, mean, gap = caratheodory_decompose(body, y, epsilon=0.05)
        assert len(vertices) == 1
        assert gap == 0.0
        np.testing.assert_array_equal(vertices[0], y)

    def test_epsilon_rule_value(self):
        assert 1.0 / np.sqrt(400) == pytest.approx(0.05)

    def test_two_vertex_split(self):
        body = LiftedBody(UnaryLattice(1, 1), ConvexBody.hypercube(1))
        y = np.array([0.5])
        vertices, mean, gap = caratheodory_decompose(body, y, epsilon=0.05)
        assert abs(mean[0] - 0.5) <= 0.05
        rng = np.random.default_rng(9)
        draws = np.array([caratheodory_round(body, y, 0.05, rng)[0] for _ in range(10_000)])
        assert draws.mean() == pytest.approx(0.5, abs=0.05)

    def test_gap_bound_on_random_points(self):
        body = LiftedBody(UnaryLattice(3, 3), ConvexBody.hypercube(3))
        rng = np.random.default_rng(10)
        for _ in range(10):
            y = body.project(rng.uniform(0, 1, 9))
            vertices, mean, gap = caratheodory_decompose(body, y, epsilon=0.1)
            assert gap <= 0.1
            for v in vertices:
                assert body.lattice.is_staircase(v, integral=True)

    def test_unreachable_accuracy_raises(self):
        # a single step cannot place a vertex average within 0.1 of 1/2
        body = LiftedBody(UnaryLattice(1, 1), ConvexBody.hypercube(1))
        with pytest.raises(RoundingError):
            caratheodory_decompose(body, np.array([0.5]), epsilon=0.1, constant=0.01)

    def test_expected_vertex_equals_mean(self):
        body = LiftedBody(UnaryLattice(2, 2), ConvexBody.hypercube(2))
        y = body.project(np.array([0.7, 0.3, 0.9, 0.1]))
        vertices, mean, _ = caratheodory_decompose(body, y, epsilon=0.05)
        rng = np.random.default_rng(11)
        draws = np.stack([caratheodory_round(body, y, 0.05, rng) for _ in range(20_000)])
        np.testing.assert_allclose(draws.mean(axis=0), mean, atol=0.02)


class TestVeeOracle:
    def test_default_granularity_rule(self):
        assert default_granularity(256, 1) == 4
        assert default_granularity(10, 1000) == 1

    def test_first_play_is_initializer(self):
        body = ConvexBody.budget(3, 1.0)
        oracle = VeeOracle(body, horizon=16, rng=np.random.default_rng(0))
        np.testing.assert_array_equal(oracle.play(), np.zeros(3))

    def test_vee_identity(self):
        # 1_C v z = z + 1_C o (1 - z), the linearization the reward transport uses
        rng = np.random.default_rng(1)
        for _ in range(100):
            c_bits = (rng.random(6) < 0.5).astype(float)
            z = rng.uniform(0, 1, 6)
            lhs = np.maximum(c_bits, z)
            rhs = z + c_bits * (1 - z)
            np.testing.assert_allclose(lhs, rhs, atol=1e-12)

    def test_zero_rewards_keep_plays_feasible(self):
        body = ConvexBody.budget(4, 1.0)
        oracle = VeeOracle(body, horizon=32, rng=np.random.default_rng(2))
        rng = np.random.default_rng(3)
        for _ in range(32):
            x = oracle.play()
            assert body.contains(x)
            oracle.feedback(body.sample(rng), np.zeros(4))

    def test_plays_on_lattice_fuzz(self):
        body = ConvexBody.budget(4, 1.2)
        oracle = VeeOracle(body, horizon=500, rng=np.random.default_rng(4))
        rng = np.random.default_rng(5)
        for _ in range(500):
            x = oracle.play()
            oracle.lattice.levels(x)  # raises off-lattice
            assert body.contains(x)
            oracle.feedback(body.sample(rng), rng.normal(size=4))

    def test_replay_determinism(self):
        def run(seed):
            body = ConvexBody.budget(3, 1.0)
            oracle = VeeOracle(body, horizon=64, rng=np.random.default_rng(seed))
            rng = np.random.default_rng(42)
            plays = []
            for _ in range(64):
                plays.append(oracle.play())
                oracle.feedback(rng.uniform(0, 0.5, 3), rng.normal(size=3))
            return np.stack(plays)

        np.testing.assert_array_equal(run(7), run(7))

    def test_realized_reward_value(self):
        body = ConvexBody.budget(2, 1.0)
        oracle = VeeOracle(body, horizon=8, rng=np.random.default_rng(6))
        x = oracle.play()
        c = np.array([0.4, 0.2])
        a = np.array([1.0, -2.0])
        got = oracle.feedback(c, a)
        assert got == pytest.approx(a @ np.maximum(c, x))

    def test_ascent_strategy_on_hypercube_base(self):
        oracle = VeeOracle(ConvexBody.hypercube(2), horizon=16, rng=np.random.default_rng(7))
        assert oracle.strategy == "ascent"
        rng = np.random.default_rng(8)
        for _ in range(16):
            x = oracle.play()
            oracle.lattice.levels(x)
            oracle.feedback(rng.uniform(0, 1, 2), rng.normal(size=2))

    def test_budget_base_forces_perturbed_leader(self):
        oracle = VeeOracle(ConvexBody.budget(2, 1.0), horizon=16, rng=np.random.default_rng(9))
        assert oracle.strategy == "perturbed-leader"
        with pytest.raises(UnsupportedLiftedBase):
            VeeOracle(ConvexBody.budget(2, 1.0), horizon=16, strategy="ascent",
                      rng=np.random.default_rng(10))

    def test_regret_against_lattice_bruteforce(self):
        """Total vee reward within the documented envelope of the lattice optimum."""
        n, horizon = 4, 200
        body = ConvexBody.budget(n, 1.0)
        oracle = VeeOracle(body, horizon=horizon, rng=np.random.default_rng(11))
        rng = np.random.default_rng(12)
        contexts = np.stack([body.sample(rng) * 0.5 for _ in range(horizon)])
        rewards = rng.normal(0.3, 1.0, size=(horizon, n))
        total = 0.0
        for t in range(horizon):
            oracle.play()
            total += oracle.feedback(contexts[t], rewards[t])
        # hindsight: best fixed lattice point by exhaustive search
        points = oracle.lattice.enumerate_points(body)
        best = -np.inf
        for xbar in points:
            value = float(np.einsum("ti,ti->", rewards, np.maximum(contexts, xbar)))
            best = max(best, value)
        bound = np.linalg.norm(rewards, axis=1).max() * (n * horizon) ** 0.75
        assert total >= best - 2.0 * bound
        # and the oracle must actually track the optimum to within 25%
        assert total >= 0.75 * best
