import json
import math

import numpy as np
import pytest

from blockselect.graph_core import Graph
from blockselect.sbm import neg_bernoulli_entropy
from blockselect.selection import (
    Penalty,
    criterion,
    penalty_value,
    profile_scan,
    select_k,
)


def two_cliques(size=4):
    n = 2 * size
    a = np.zeros((n, n), dtype=int)
    a[:size, :size] = 1 - np.eye(size, dtype=int)
    a[size:, size:] = 1 - np.eye(size, dtype=int)
    return Graph(a)


class TestPenaltyValue:
    def test_k_one_reduces_to_parameter_term(self):
        for lam in (0.0, 1.0, 3.3):
            assert np.isclose(
                penalty_value(Penalty("cbic", lam), 1, 100), math.log(100)
            )

    def test_frozen_value(self):
        assert np.isclose(
            penalty_value(Penalty("cbic", 1.0), 3, 500), 586.5937929245881
        )

    def test_zero_lambda_equals_bic(self):
        for k in range(1, 12):
            for n in (10, 100, 1000):
                assert penalty_value(Penalty("cbic", 0.0), k, n) == penalty_value(
                    Penalty("bic", 0.0), k, n
                )

    def test_heavier_variant(self):
        k, n, lam = 4, 200, 0.5
        assert np.isclose(
            penalty_value(Penalty("wb", lam), k, n),
            lam * k * (k + 1) / 2 * n * math.log(n),
        )

    def test_strictly_increasing_in_k(self):
        for lam in (0.5, 1.0, 2.0):
            vals = [penalty_value(Penalty("cbic", lam), k, 300) for k in range(1, 10)]
            assert all(vals[i + 1] > vals[i] for i in range(len(vals) - 1))

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            Penalty("cbic", -1.0)
        with pytest.raises(ValueError):
            Penalty("unknown", 1.0)
        with pytest.raises(ValueError):
            penalty_value(Penalty(), 0, 100)


class TestCriterion:
    def test_k_one_closed_form(self):
        g = two_cliques(4)
        rec = criterion(g, 1, Penalty("cbic", 1.0), seed=0)
        pairs = 8 * 7 / 2
        density = np.triu(g.entries, 1).sum() / pairs
        expected = pairs * neg_bernoulli_entropy(density) - math.log(8)
        assert np.isclose(rec.criterion_value, expected)

    def test_two_cliques_prefer_two_blocks(self):
        g = two_cliques(4)
        rec1 = criterion(g, 1, Penalty("cbic", 1.0), seed=0)
        rec2 = criterion(g, 2, Penalty("cbic", 1.0), seed=0)
        # the two-block profile is exactly 0 (pure within, empty between)
        assert np.isclose(rec2.profile_loglik, 0.0)
        assert rec2.criterion_value > rec1.criterion_value

    def test_decomposition_exact(self):
        g = two_cliques(3)
        rec = criterion(g, 2, Penalty("cbic", 1.0), seed=1)
        assert rec.criterion_value == rec.profile_loglik - rec.penalty_value


class TestSelectK:
    def test_two_cliques(self):
        g = two_cliques(4)
        report = select_k(g, (1, 4), Penalty("cbic", 1.0), seed=3)
        assert report.k_hat == 2
        assert report.failures == 0
        ks = [r.k for r in report.per_k]
        assert ks == [1, 2, 3, 4]

    def test_matches_standalone_criterion(self):
        g = two_cliques(4)
        report = select_k(g, (1, 3), Penalty("cbic", 1.0), seed=9)
        for rec in report.per_k:
            solo = criterion(g, rec.k, Penalty("cbic", 1.0), seed=9)
            assert np.isclose(solo.profile_loglik, rec.profile_loglik)
            assert np.isclose(solo.criterion_value, rec.criterion_value)

    def test_lambda_ordering_with_shared_labels(self):
        # for fixed per-k labels, increasing lambda weakly lowers the argmax
        g = two_cliques(5)
        entries = profile_scan(g, [1, 2, 3, 4], "sbm", "spectral", False, seed=5)
        profiles = {e.k: e.profile for e in entries}
        n = g.n
        prev_khat = None
        for lam in (0.0, 0.5, 1.0, 2.0, 4.0, 8.0):
            values = {
                k: profiles[k] - penalty_value(Penalty("cbic", lam), k, n)
                for k in profiles
            }
            best = max(values.values())
            khat = min(k for k, v in values.items() if v >= best - 1e-12)
            if prev_khat is not None:
                assert khat <= prev_khat
            prev_khat = khat

    def test_deterministic_given_seed(self):
        rng = np.random.default_rng(8)
        upper = np.triu((rng.random((30, 30)) < 0.3).astype(int), 1)
        g = Graph(upper + upper.T)
        r1 = select_k(g, (1, 5), Penalty("cbic", 1.0), seed=4)
        r2 = select_k(g, (1, 5), Penalty("cbic", 1.0), seed=4)
        assert r1.k_hat == r2.k_hat
        for a, b in zip(r1.per_k, r2.per_k):
            assert a.profile_loglik == b.profile_loglik
            assert np.array_equal(a.labels.labels, b.labels.labels)

    def test_ties_break_to_smallest_k(self):
        # empty graph: every candidate has profile 0 at lambda 0 differing
        # only by the parameter count, so k=1 wins; with an artificial zero
        # penalty the criterion ties across k and the report says so
        g = Graph(np.zeros((6, 6), dtype=int))
        entries = profile_scan(g, [1, 2], "sbm", "spectral", False, seed=0)
        assert all(np.isclose(e.profile, 0.0) for e in entries)
        report = select_k(g, (1, 3), Penalty("bic", 0.0), seed=0)
        assert report.k_hat == 1

    def test_report_serialization_round_trip(self, tmp_path):
        g = two_cliques(3)
        report = select_k(g, (1, 3), Penalty("cbic", 1.0), seed=2)
        json_path = tmp_path / "report.json"
        csv_path = tmp_path / "per_k.csv"
        report.write_json(str(json_path))
        report.write_csv(str(csv_path))
        payload = json.loads(json_path.read_text())
        assert payload["k_hat"] == report.k_hat
        assert len(payload["per_k"]) == 3
        assert payload["per_k"][1]["labels"] == [int(v) for v in report.per_k[1].labels.labels]
        lines = csv_path.read_text().strip().splitlines()
        assert lines[0].startswith("k,profile_loglik")
        assert len(lines) == 4

    def test_rejects_sbm_on_counts(self):
        g = Graph(np.array([[0, 2], [2, 0]]), mode="counts")
        with pytest.raises(ValueError, match="binar"):
            select_k(g, (1, 2), Penalty(), model="sbm", seed=0)

    def test_dcsbm_scan_on_counts(self):
        rng = np.random.default_rng(12)
        upper = np.triu(rng.poisson(0.6, size=(20, 20)), 1)
        g = Graph(upper + upper.T, mode="counts")
        report = select_k(
            g, (1, 3), Penalty("cbic", 1.0), model="dcsbm", method="score", seed=1
        )
        assert report.k_hat in (1, 2, 3)

    def test_bic_never_selects_below_corrected_criterion(self):
        # shared labels per k: the heavier corrected penalty can only move
        # the argmax toward smaller k
        from blockselect.simgen import sim1_design, sample_sbm

        design = sim1_design()
        dominated = 0
        for rep in range(6):
            g, _ = sample_sbm(design, np.random.default_rng(100 + rep))
            entries = profile_scan(g, list(range(1, 9)), "sbm", "spectral", False, seed=rep)
            k_hat = {}
            for kind, lam in (("bic", 0.0), ("cbic", 1.0)):
                vals = {
                    e.k: e.profile - penalty_value(Penalty(kind, lam), e.k, g.n)
                    for e in entries
                }
                best = max(vals.values())
                k_hat[kind] = min(k for k, v in vals.items() if v >= best - 1e-9)
            if k_hat["bic"] >= k_hat["cbic"]:
                dominated += 1
        assert dominated >= 4  # holds in a clear majority (in fact always)

    def test_sim1_criterion_prefers_true_k(self):
        # separation at the distribution-check design is sharp: the penalized
        # criterion at the true block count beats both neighbors
        from blockselect.simgen import sim1_design, sample_sbm

        design = sim1_design()
        wins = 0
        for rep in range(10):
            g, _ = sample_sbm(design, np.random.default_rng(rep))
            entries = profile_scan(g, [2, 3, 4], "sbm", "spectral", False, seed=rep)
            vals = {
                e.k: e.profile - penalty_value(Penalty("cbic", 1.0), e.k, g.n)
                for e in entries
            }
            if vals[3] > vals[2] and vals[3] > vals[4]:
                wins += 1
        assert wins >= 9

    def test_full_default_range_row_count(self):
        from blockselect.simgen import homogeneous_design, sample_sbm

        g, _ = sample_sbm(homogeneous_design(3, 5.0), np.random.default_rng(0))
        report = select_k(g, (1, 18), Penalty("cbic", 1.0), seed=1)
        assert len(report.per_k) == 18
        assert report.k_hat == 3

    def test_strong_two_block_network_under_degree_model(self):
        # binary network with two dense blocks and heterogeneous degrees:
        # the degree-corrected criterion at lambda=1 picks two blocks
        rng = np.random.default_rng(42)
        n = 120
        half = n // 2
        w = rng.uniform(0.5, 1.5, size=n)
        z = np.repeat([0, 1], half)
        base = np.where(z[:, None] == z[None, :], 0.25, 0.03)
        prob = np.clip(np.outer(w, w) * base, 0, 1)
        a = np.triu((rng.random((n, n)) < prob).astype(int), 1)
        g = Graph(a + a.T)
        report = select_k(
            g, (1, 8), Penalty("cbic", 1.0), model="dcsbm", method="score", seed=5
        )
        assert report.k_hat == 2

    def test_refined_profiles_dominate_unrefined(self):
        rng = np.random.default_rng(13)
        upper = np.triu((rng.random((40, 40)) < 0.25).astype(int), 1)
        g = Graph(upper + upper.T)
        plain = profile_scan(g, [2, 3, 4], "sbm", "spectral", False, seed=6)
        refined = profile_scan(g, [2, 3, 4], "sbm", "spectral", True, seed=6)
        for a, b in zip(plain, refined):
            assert b.profile >= a.profile - 1e-9
