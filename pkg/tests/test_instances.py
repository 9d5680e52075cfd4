"""Objective families, graph ingestion, and samplers."""

import gzip

import numpy as np
import pytest

from drsubmax import (BatchSampler, QuadraticFunction, RevenueFunction, dr_check,
                      gen_random_graph, gen_random_quadratic, grad_check, load_edge_list,
                      noisy_gradient, two_vertex_revenue)
from drsubmax.instances import EdgeListError


class TestRevenue:
    def test_two_vertex_values(self):
        fn = two_vertex_revenue(0.5)
        assert fn.value(np.array([1.0, 0.0])) == pytest.approx(0.5)
        assert fn.value(np.array([1.0, 1.0])) == pytest.approx(0.5)
        assert fn.value(np.zeros(2)) == 0.0

    def test_zero_for_every_instance(self):
        rng = np.random.default_rng(0)
        for seed in range(5):
            g = gen_random_graph(6, 0.5, weight_range=(0.5, 2.0), seed=seed)
            fn = RevenueFunction(g.weights, 0.1)
            assert fn.value(np.zeros(6)) == 0.0
            assert fn.value(rng.uniform(0, 1, 6)) >= 0.0

    def test_gradient_matches_finite_differences(self):
        g = gen_random_graph(7, 0.6, weight_range=(0.2, 1.5), seed=3)
        fn = RevenueFunction(g.weights, 0.2)
        rng = np.random.default_rng(1)
        for _ in range(5):
            assert grad_check(fn, rng.uniform(0.1, 0.9, 7)) < 1e-8

    def test_gradient_origin_closed_form(self):
        fn = two_vertex_revenue(0.5)
        np.testing.assert_allclose(fn.gradient(np.zeros(2)),
                                   [np.log(2.0), np.log(2.0)], rtol=1e-12)

    def test_value_batch_consistent(self):
        g = gen_random_graph(5, 0.7, seed=4)
        fn = RevenueFunction(g.weights, 0.15)
        xs = np.random.default_rng(2).uniform(0, 1, (20, 5))
        np.testing.assert_allclose(fn.value_batch(xs), [fn.value(x) for x in xs], rtol=1e-12)

    def test_closed_form_sum(self):
        g1 = gen_random_graph(4, 0.8, seed=5)
        g2 = gen_random_graph(4, 0.8, seed=6)
        s = RevenueFunction(g1.weights, 0.1) + RevenueFunction(g2.weights, 0.1)
        assert isinstance(s, RevenueFunction)
        x = np.random.default_rng(3).uniform(0, 1, 4)
        expect = RevenueFunction(g1.weights, 0.1).value(x) + RevenueFunction(g2.weights, 0.1).value(x)
        assert s.value(x) == pytest.approx(expect)

    def test_p_validated(self):
        g = gen_random_graph(3, 1.0, seed=0)
        for bad in (0.0, 1.0, -0.2, 1.5):
            with pytest.raises(ValueError):
                RevenueFunction(g.weights, bad)

    def test_dr_submodular_up_to_half(self):
        for p in (0.05, 0.3, 0.5):
            report = dr_check(two_vertex_revenue(p), 800, np.random.default_rng(4))
            assert report.passed, p

    def test_dr_fails_beyond_half(self):
        # the symmetric family leaves the DR regime exactly where it turns
        # non-monotone: both reduce to sum_j w_kj (1 - 2 (1-p)^{x_j}) <= 0
        report = dr_check(two_vertex_revenue(0.7), 800, np.random.default_rng(4))
        assert report.value_violation > 1e-6

    def test_non_monotone_witness(self):
        flat = two_vertex_revenue(0.5)
        assert flat.gradient(np.array([1.0, 1.0]))[1] == pytest.approx(0.0, abs=1e-12)
        steep = two_vertex_revenue(0.7)
        assert steep.gradient(np.array([1.0, 1.0]))[1] < -1e-3


class TestEdgeList:
    def test_basic_parse(self, tmp_path):
        path = tmp_path / "g.txt"
        path.write_text("0 1\n1 2\n")
        g = load_edge_list(path)
        assert g.n == 3 and g.edge_count == 2
        assert g.weights[0, 1] == 1.0 and g.weights[1, 0] == 1.0
        assert g.weights[1, 2] == 1.0 and g.weights[2, 1] == 1.0

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.txt"
        path.write_text("")
        g = load_edge_list(path)
        assert g.n == 0 and g.edge_count == 0

    def test_duplicate_edges_sum(self, tmp_path):
        path = tmp_path / "dups.txt"
        path.write_text("0 1 2.5\n0 1 0.5\n")
        g = load_edge_list(path)
        assert g.weights[0, 1] == pytest.approx(3.0)

    def test_comments_and_weights(self, tmp_path):
        path = tmp_path / "c.txt"
        path.write_text("# header\n0 2 0.25\n\n# more\n1 2\n")
        g = load_edge_list(path)
        assert g.n == 3
        assert g.weights[0, 2] == pytest.approx(0.25)

    def test_gzip_transparent(self, tmp_path):
        path = tmp_path / "g.txt.gz"
        with gzip.open(path, "wt") as fh:
            fh.write("0 1\n")
        assert load_edge_list(path).edge_count == 1

    @pytest.mark.parametrize("content,fragment", [
        ("0 0\n", "self-loop"),
        ("0 1 -2\n", "negative weight"),
        ("0\n", "expected"),
        ("a b\n", "line 1"),
    ])
    def test_malformed_lines_report_position(self, tmp_path, content, fragment):
        path = tmp_path / "bad.txt"
        path.write_text(content)
        with pytest.raises(EdgeListError, match=fragment):
            load_edge_list(path)


class TestRandomGraph:
    def test_edge_prob_extremes(self):
        assert gen_random_graph(5, 0.0, seed=1).edge_count == 0
        assert gen_random_graph(3, 1.0, seed=1).edge_count == 3

    def test_seed_determinism(self):
        a = gen_random_graph(100, 0.1, seed=42)
        b = gen_random_graph(100, 0.1, seed=42)
        c = gen_random_graph(100, 0.1, seed=43)
        assert (a.weights != b.weights).nnz == 0
        assert (a.weights != c.weights).nnz > 0


class TestBatchSampler:
    def test_full_batch_is_whole_graph(self):
        g = gen_random_graph(6, 0.5, seed=7)
        sampler = BatchSampler(g, 6, 0.1, np.random.default_rng(0))
        fn = sampler.draw()
        x = np.random.default_rng(1).uniform(0, 1, 6)
        assert fn.value(x) == pytest.approx(RevenueFunction(g.weights, 0.1).value(x))

    def test_masked_weights_subset(self):
        g = gen_random_graph(10, 0.6, seed=8)
        sampler = BatchSampler(g, 4, 0.1, np.random.default_rng(2))
        fn = sampler.draw()
        kept = np.flatnonzero(np.asarray(fn.weights.sum(axis=1)).ravel() > 0)
        assert len(kept) <= 4
        # masked weights agree with the base graph where present
        coo = fn.weights.tocoo()
        for i, j, w in zip(coo.row, coo.col, coo.data):
            assert w == pytest.approx(g.weights[i, j])

    def test_batches_independent_and_dr(self):
        g = gen_random_graph(12, 0.5, seed=9)
        sampler = BatchSampler(g, 5, 0.05, np.random.default_rng(3))
        rng = np.random.default_rng(4)
        draws = [sampler.draw() for _ in range(4)]
        assert any((draws[0].weights != d.weights).nnz > 0 for d in draws[1:])
        for fn in draws[:2]:
            assert dr_check(fn, 200, rng).passed

    def test_batch_size_validated(self):
        g = gen_random_graph(4, 0.5, seed=10)
        with pytest.raises(ValueError):
            BatchSampler(g, 5, 0.1, np.random.default_rng(0))


class TestQuadratic:
    def test_generator_nonnegative_and_dr(self):
        rng = np.random.default_rng(5)
        for _ in range(5):
            fn = gen_random_quadratic(5, rng)
            xs = rng.uniform(0, 1, (200, 5))
            assert np.all(fn.value_batch(xs) >= 0)
            assert dr_check(fn, 200, rng).passed

    def test_validation(self):
        with pytest.raises(ValueError):
            QuadraticFunction(np.array([[0.5]]), np.zeros(1), 0.0)  # positive entry
        with pytest.raises(ValueError):
            QuadraticFunction(np.zeros((2, 2)), np.array([-1.0, 0.0]), 0.0)
        with pytest.raises(ValueError):
            QuadraticFunction(np.zeros((2, 2)), np.zeros(2), -1.0)

    def test_closed_form_sum(self):
        rng = np.random.default_rng(6)
        a, b = gen_random_quadratic(3, rng), gen_random_quadratic(3, rng)
        s = a + b
        assert isinstance(s, QuadraticFunction)
        x = rng.uniform(0, 1, 3)
        assert s.value(x) == pytest.approx(a.value(x) + b.value(x))


class TestNoisyGradient:
    def test_sigma_zero_exact(self):
        fn = two_vertex_revenue(0.3)
        x = np.array([0.4, 0.6])
        np.testing.assert_array_equal(noisy_gradient(fn, x, 0.0, np.random.default_rng(0)),
                                      fn.gradient(x))

    def test_unbiased_and_variance(self):
        rng = np.random.default_rng(7)
        fn = gen_random_quadratic(4, rng)
        x = np.full(4, 0.5)
        sigma = 0.8
        draws = np.stack([noisy_gradient(fn, x, sigma, rng) for _ in range(10000)])
        exact = fn.gradient(x)
        np.testing.assert_allclose(draws.mean(axis=0), exact, atol=3 * sigma / 100 * 3)
        emp_var = np.mean(np.sum((draws - exact) ** 2, axis=1))
        assert emp_var == pytest.approx(sigma ** 2, rel=0.05)
