import math

import numpy as np
import pytest

from blockselect.dcsbm import (
    DcsbmParams,
    check_identifiability,
    log_likelihood_dcsbm,
    mle_node_weights,
    mle_theta_poisson,
    profile_log_likelihood_dcsbm,
)
from blockselect.graph_core import Assignment, Graph, count_stats, degrees
from blockselect.sbm import DegenerateParameterError


def random_counts_graph(rng, n, rate=0.8):
    upper = np.triu(rng.poisson(rate, size=(n, n)), 1)
    return Graph(upper + upper.T, mode="counts")


def poisson_block_sum(g, z, theta):
    """(1/2) sum over ordered block pairs of (m log theta - n theta)."""
    cs = count_stats(g, z)
    total = 0.0
    for a in range(z.k):
        for b in range(z.k):
            if cs.m_pair[a, b] > 0:
                total += cs.m_pair[a, b] * math.log(theta[a, b])
            total -= cs.n_pair[a, b] * theta[a, b]
    return total / 2


class TestLogLikelihood:
    def test_unit_weights_reduce_to_block_sum(self):
        rng = np.random.default_rng(1)
        n = 8
        g = random_counts_graph(rng, n)
        z = Assignment(rng.integers(1, 3, size=n), k=2)
        theta = np.array([[0.9, 0.3], [0.3, 0.7]])
        params = DcsbmParams(theta, np.ones(n), z.block_sizes() / n)
        assert np.isclose(
            log_likelihood_dcsbm(g, params, z), poisson_block_sum(g, z, theta)
        )

    def test_empty_graph(self):
        n = 6
        g = Graph(np.zeros((n, n), dtype=int), mode="counts")
        z = Assignment(np.array([1, 1, 1, 2, 2, 2]), k=2)
        theta = np.array([[0.5, 0.2], [0.2, 0.8]])
        params = DcsbmParams(theta, np.ones(n), np.array([0.5, 0.5]))
        cs = count_stats(g, z)
        expected = -0.5 * np.sum(cs.n_pair * theta)
        assert np.isclose(log_likelihood_dcsbm(g, params, z), expected)

    def test_per_pair_poisson_oracle_unit_weights(self):
        # with unit weights the block-level rate term equals the per-pair sum,
        # so the likelihood matches the per-pair Poisson log-pmf exactly
        # (dropping the log A_ij! constants)
        rng = np.random.default_rng(8)
        n = 7
        g = random_counts_graph(rng, n)
        z = Assignment(rng.integers(1, 3, size=n), k=2)
        theta = np.array([[1.1, 0.4], [0.4, 0.8]])
        params = DcsbmParams(theta, np.ones(n), z.block_sizes() / n)
        oracle = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                rate = theta[z.labels[i] - 1, z.labels[j] - 1]
                oracle += g.entries[i, j] * math.log(rate) - rate
        assert np.isclose(log_likelihood_dcsbm(g, params, z), oracle)

    def test_per_pair_oracle_heterogeneous_weight_terms(self):
        # heterogeneous weights: degree and count terms match the per-pair
        # Poisson oracle; the quadratic rate term is block-level by design
        rng = np.random.default_rng(9)
        n = 8
        g = random_counts_graph(rng, n)
        z = Assignment(np.array([1, 1, 1, 1, 2, 2, 2, 2]), k=2)
        w = rng.uniform(0.5, 1.5, size=n)
        for a in (0, 1):
            mask = z.zero_based() == a
            w[mask] *= mask.sum() / w[mask].sum()
        theta = np.array([[1.0, 0.3], [0.3, 0.9]])
        params = DcsbmParams(theta, w, np.array([0.5, 0.5]))
        cs = count_stats(g, z)
        oracle_loglinear = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                if g.entries[i, j]:
                    rate = w[i] * w[j] * theta[z.labels[i] - 1, z.labels[j] - 1]
                    oracle_loglinear += g.entries[i, j] * math.log(rate)
        block_rate = 0.5 * np.sum(cs.n_pair * theta)
        assert np.isclose(
            log_likelihood_dcsbm(g, params, z), oracle_loglinear - block_rate
        )

    def test_zero_weight_with_degree_raises(self):
        a = np.zeros((3, 3), dtype=int)
        a[0, 1] = a[1, 0] = 1
        g = Graph(a, mode="counts")
        z = Assignment(np.array([1, 1, 2]), k=2)
        params = DcsbmParams(np.full((2, 2), 0.5),
                             np.array([0.0, 2.0, 1.0]),
                             np.array([2 / 3, 1 / 3]))
        with pytest.raises(DegenerateParameterError):
            log_likelihood_dcsbm(g, params, z)

    def test_identifiability_enforced(self):
        g = Graph(np.zeros((4, 4), dtype=int), mode="counts")
        z = Assignment(np.array([1, 1, 2, 2]), k=2)
        params = DcsbmParams(np.full((2, 2), 0.5), np.full(4, 0.9), np.array([0.5, 0.5]))
        with pytest.raises(ValueError, match="block-sum"):
            log_likelihood_dcsbm(g, params, z)


class TestMleNodeWeights:
    def test_equal_degrees_give_unit_weights(self):
        z = Assignment(np.array([1, 1, 1]), k=1)
        w, flags = mle_node_weights(np.array([4.0, 4.0, 4.0]), z)
        assert np.allclose(w, 1.0)
        assert flags == ()

    def test_two_node_block_example(self):
        z = Assignment(np.array([1, 1]), k=1)
        w, _ = mle_node_weights(np.array([2.0, 6.0]), z)
        assert np.allclose(w, [0.5, 1.5])

    def test_constraint_exact_on_random_graphs(self):
        rng = np.random.default_rng(4)
        for _ in range(10):
            n = int(rng.integers(6, 20))
            g = random_counts_graph(rng, n)
            k = int(rng.integers(1, 4))
            z = Assignment(rng.integers(1, k + 1, size=n), k=k)
            w, _ = mle_node_weights(degrees(g), z)
            sums = np.bincount(z.zero_based(), weights=w, minlength=k)
            assert np.allclose(sums, z.block_sizes(), atol=1e-12)

    def test_zero_degree_block_flagged(self):
        z = Assignment(np.array([1, 1, 2, 2]), k=2)
        w, flags = mle_node_weights(np.array([3.0, 1.0, 0.0, 0.0]), z)
        assert flags == (2,)
        assert np.allclose(w[2:], 1.0)

    def test_zero_degree_node_in_live_block(self):
        z = Assignment(np.array([1, 1, 1]), k=1)
        w, flags = mle_node_weights(np.array([0.0, 2.0, 4.0]), z)
        assert flags == ()
        assert w[0] == 0.0
        assert np.isclose(w.sum(), 3.0)


class TestProfile:
    def test_single_block_formula(self):
        rng = np.random.default_rng(14)
        n = 9
        g = random_counts_graph(rng, n)
        z = Assignment(np.ones(n, dtype=int), k=1)
        d = degrees(g)
        cs = count_stats(g, z)
        th = cs.m_pair[0, 0] / cs.n_pair[0, 0]
        w, _ = mle_node_weights(d, z)
        pos = d > 0
        expected = np.sum(d[pos] * np.log(w[pos])) + 0.5 * (
            cs.m_pair[0, 0] * math.log(th) - cs.n_pair[0, 0] * th
        )
        assert np.isclose(profile_log_likelihood_dcsbm(g, z), expected)

    def test_plugins_maximize(self):
        rng = np.random.default_rng(15)
        n = 10
        g = random_counts_graph(rng, n)
        z = Assignment(rng.integers(1, 3, size=n), k=2)
        base = profile_log_likelihood_dcsbm(g, z)
        cs = count_stats(g, z)
        d = degrees(g)
        w_hat, _ = mle_node_weights(d, z)
        th_hat = mle_theta_poisson(cs)
        p = z.block_sizes() / n
        # rate perturbations never help
        for eps in (0.05, -0.05):
            th = th_hat.copy()
            th[0, 1] = max(th[0, 1] + eps, 1e-6)
            th[1, 0] = th[0, 1]
            val = log_likelihood_dcsbm(g, DcsbmParams(th, w_hat, p), z)
            assert val <= base + 1e-9
        # redistributing weight inside a block (constraint preserved) never helps
        w = w_hat.copy()
        block = np.nonzero((z.zero_based() == 0) & (w > 0))[0]
        if block.size >= 2:
            shift = 0.2 * w[block[0]]
            w[block[0]] -= shift
            w[block[1]] += shift
            val = log_likelihood_dcsbm(g, DcsbmParams(th_hat, w, p), z)
            assert val <= base + 1e-9

    def test_relabel_invariance(self):
        rng = np.random.default_rng(16)
        n = 12
        g = random_counts_graph(rng, n)
        labels = rng.integers(1, 4, size=n)
        z = Assignment(labels, k=3)
        perm = np.array([3, 1, 2])
        z_perm = Assignment(perm[labels - 1], k=3)
        assert np.isclose(
            profile_log_likelihood_dcsbm(g, z), profile_log_likelihood_dcsbm(g, z_perm)
        )

    def test_unit_weight_graphs_match_poisson_block_model(self):
        # graphs whose degrees are constant within blocks give w_hat = 1,
        # so the degree term vanishes and the profile is the pure block part
        a = np.zeros((6, 6), dtype=int)
        for i, j in [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]:
            a[i, j] = a[j, i] = 1
        g = Graph(a, mode="counts")
        z = Assignment(np.array([1, 1, 1, 2, 2, 2]), k=2)
        w, _ = mle_node_weights(degrees(g), z)
        assert np.allclose(w, 1.0)
        cs = count_stats(g, z)
        th = mle_theta_poisson(cs)
        expected = 0.5 * np.sum(
            np.where(cs.m_pair > 0, cs.m_pair * np.log(th, where=th > 0), 0.0)
            - cs.n_pair * th
        )
        assert np.isclose(profile_log_likelihood_dcsbm(g, z), expected)


class TestCheckIdentifiability:
    def test_passes_on_plugin_weights(self):
        rng = np.random.default_rng(20)
        g = random_counts_graph(rng, 10)
        z = Assignment(rng.integers(1, 3, size=10), k=2)
        w, _ = mle_node_weights(degrees(g), z)
        params = DcsbmParams(mle_theta_poisson(count_stats(g, z)), w, z.block_sizes() / 10)
        check_identifiability(params, z)  # should not raise
