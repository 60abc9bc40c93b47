import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from choice_rank.choice_models import NoiseFamily, ParametricChoiceModel, PartworthVector, TabularChoiceModel, mnl_model
from choice_rank.errors import DomainError
from choice_rank.sampling import enumerate_menus
from choice_rank.theory import (
    BordaScoreVector,
    approx_recovery_bound,
    borda_scores_exact,
    borda_scores_mc,
    check_borda_consistency,
    exact_recovery_bound,
    exact_recovery_lower_bound,
    gap_report,
    hardest_pair_ratio,
    kl_special_pair,
    mnl_gap_sandwich,
    pairwise_error_bound,
)


def probit(u):
    return ParametricChoiceModel(PartworthVector(np.asarray(u, dtype=float)), NoiseFamily.NORMAL)


class TestBordaScores:
    def test_uniform(self):
        np.testing.assert_allclose(borda_scores_exact(np.ones(6), 3).taus, 1 / 3)

    def test_hand_enumeration(self):
        np.testing.assert_allclose(borda_scores_exact([2, 1, 1], 2).taus, [2 / 3, 5 / 12, 5 / 12])

    def test_sum_identity_by_direct_loop(self, rng):
        w = rng.exponential(size=8)
        taus = borda_scores_exact(w, 3).taus
        # independent summation order: accumulate per menu in reverse lexicographic order
        direct = np.zeros(8)
        for menu in reversed(list(enumerate_menus(8, 3))):
            idx = np.array(menu) - 1
            direct[idx] += w[idx] / w[idx].sum()
        np.testing.assert_allclose(taus, direct / math.comb(7, 2), rtol=1e-13)
        assert taus.sum() == pytest.approx(8 / 3, abs=1e-10)

    def test_tabular_missing_menu(self):
        table = TabularChoiceModel(3, {(1, 2): (0.5, 0.5), (1, 3): (0.5, 0.5)})
        with pytest.raises(DomainError, match=r"\(2, 3\)"):
            borda_scores_exact(table, 2)

    def test_probit_needs_mc(self):
        with pytest.raises(DomainError):
            borda_scores_exact(probit([0.0, 1.0, 2.0]), 2)

    def test_enumeration_cap(self):
        with pytest.raises(DomainError):
            borda_scores_exact(np.ones(60), 10)

    def test_mc_matches_exact(self):
        w = np.array([3.0, 2.0, 1.5, 1.0, 0.5, 0.5])
        est = borda_scores_mc(mnl_model(w), 3, 3000, 5, np.random.default_rng(3))
        exact = borda_scores_exact(w, 3).taus
        assert np.all(np.abs(est.taus - exact) <= 4 * est.se)
        assert est.mode == "monte-carlo"

    def test_mc_uniform(self):
        est = borda_scores_mc(probit(np.zeros(5)), 2, 2000, 5, np.random.default_rng(4))
        assert np.all(np.abs(est.taus - 0.5) <= 4 * est.se)

    def test_mc_counts(self):
        with pytest.raises(DomainError):
            borda_scores_mc(mnl_model([1, 1]), 2, 0, 1, np.random.default_rng(0))

    def test_probit_shape(self):
        # gap factors for probit shrink with menu size, as for MNL
        u = np.random.default_rng(15).standard_normal(15)
        rng = np.random.default_rng(16)
        f1 = [gap_report(borda_scores_mc(probit(u), m, 4000, 5, rng), 3).factor_one for m in (2, 5, 8)]
        assert f1[0] > f1[1] > f1[2]


class TestGapReport:
    def test_arithmetic(self):
        rep = gap_report(BordaScoreVector(np.array([0.6, 0.3, 0.1]), 2), 1)
        assert rep.delta_K == pytest.approx(0.3)
        assert rep.factor_one == pytest.approx(1 / 0.6)
        assert rep.factor_two == pytest.approx(1.0)

    def test_h_zero(self, rng):
        scores = borda_scores_exact(rng.exponential(size=7), 3)
        rep = gap_report(scores, 3, h=0)
        assert rep.delta_K_h == rep.delta_K

    def test_flags(self):
        rep = gap_report(np.array([0.5, 0.25, 0.25]), 2, m=2)
        assert "nonpositive-gap" in rep.flags and rep.factor_one == math.inf

    def test_index_rules(self):
        t = np.array([0.9, 0.7, 0.5, 0.3, 0.2, 0.1])
        assert gap_report(t, 3, m=2, h=1).delta_K_h == pytest.approx(0.7 - 0.2)
        assert gap_report(t, 3, m=2, h=1, index_rule="K-h-1").delta_K_h == pytest.approx(0.9 - 0.2)
        with pytest.raises(DomainError):
            gap_report(t, 3, m=2, h=3)
        with pytest.raises(DomainError):
            gap_report(t, 6, m=2)


class TestBounds:
    def test_exact_bound_value(self):
        t = np.array([0.6, 0.4])
        want = 8 * 2 * math.log(2) / (2 * 0.04) * (0.2 + 0.8)
        assert exact_recovery_bound(t, 1, 2) == pytest.approx(want, rel=1e-14)
        # second path: tau_K + tau_{K+1}
        assert exact_recovery_bound(t, 1, 2) == pytest.approx(8 * 2 * math.log(2) * (0.6 + 0.4) / (2 * 0.2**2))

    def test_spec_style_example(self):
        t = np.array([0.8, 0.6, 0.4, 0.3, 0.2, 0.1, 0.1, 0.1, 0.1, 0.1])
        got = exact_recovery_bound(t, 2, 2)
        assert got == pytest.approx(8 * 10 * math.log(10) / (2 * 0.2**2) * 1.0)

    def test_superlinear_in_gap(self):
        a = exact_recovery_bound(np.array([0.5, 0.4, 0.1]), 1, 2)
        b = exact_recovery_bound(np.array([0.6, 0.4, 0.0]), 1, 2)
        assert a / b > 2

    def test_nonpositive_gap(self):
        with pytest.raises(DomainError):
            exact_recovery_bound(np.array([0.5, 0.5, 0.0]), 1, 2)
        with pytest.raises(DomainError):
            approx_recovery_bound(np.array([0.5, 0.5, 0.0]), 1, 0, 2)

    def test_approx_against_exact_at_h0(self, rng):
        # the approximate bound at h = 0 carries tau_{K+1}/delta where the exact one carries 2 tau_{K+1}/delta
        scores = borda_scores_exact(rng.exponential(size=8), 3)
        for K in range(1, 8):
            ratio = exact_recovery_bound(scores, K, 3) / approx_recovery_bound(scores, K, 0, 3)
            assert 1 <= ratio <= 2

    def test_approx_monotone_in_h(self, rng):
        scores = borda_scores_exact(rng.exponential(size=10), 3)
        vals = [approx_recovery_bound(scores, 5, h, 3) for h in range(0, 5)]
        assert all(b <= a for a, b in zip(vals, vals[1:]))

    def test_approx_second_path(self, rng):
        t = np.sort(borda_scores_exact(rng.exponential(size=9), 4).taus)[::-1]
        K, h = 4, 2
        gap = t[K - h - 1] - t[K + h]
        want = 8 * 9 * math.log(9) * (gap + t[K + h]) / (4 * gap**2)
        assert approx_recovery_bound(t, K, h, 4) == pytest.approx(want, rel=1e-13)

    def test_lower_below_upper(self, rng):
        for _ in range(20):
            t = borda_scores_exact(rng.exponential(size=8), 3)
            assert exact_recovery_lower_bound(t, 2, 3) < exact_recovery_bound(t, 2, 3)

    def test_pairwise_bound(self):
        got = pairwise_error_bound(0.6, 0.4, 10, 2, 1000)
        assert got == pytest.approx(math.exp(-3 * 1000 * 0.16 / 80))
        with pytest.raises(DomainError):
            pairwise_error_bound(0.4, 0.6, 10, 2, 10)


@settings(max_examples=60, deadline=None)
@given(st.integers(3, 9), st.data())
def test_simple_inequality(n, data):
    m = data.draw(st.integers(2, n))
    K = data.draw(st.integers(1, n - 1))
    seed = data.draw(st.integers(0, 2**32 - 1))
    lhs, rhs = hardest_pair_ratio(borda_scores_exact(np.exp(np.random.default_rng(seed).normal(size=n)), m), K)
    assert lhs == pytest.approx(rhs, rel=1e-12)


class TestSandwich:
    def test_random(self, rng):
        for _ in range(100):
            n = int(rng.integers(4, 11))
            m = int(rng.integers(2, n))
            w = np.exp(rng.normal(size=n))
            i, j = sorted(rng.choice(n, 2, replace=False) + 1, key=lambda k: -w[k - 1])
            lo, ex, up = mnl_gap_sandwich(w, int(i), int(j), m)
            assert lo <= ex <= up

    def test_extreme_pair(self, rng):
        w = np.sort(rng.exponential(size=8))[::-1]
        lo, ex, up = mnl_gap_sandwich(w, 1, 8, 4)
        assert lo <= ex <= up

    def test_scale_free(self, rng):
        w = rng.exponential(size=6) + 0.1
        i, j = (int(k) + 1 for k in np.argsort(-w)[:2])
        np.testing.assert_allclose(mnl_gap_sandwich(w, i, j, 3), mnl_gap_sandwich(7.5 * w, i, j, 3), rtol=1e-12)

    def test_vanishing_gap(self):
        base = np.array([2.0, 1.0, 1.5, 0.7, 1.2])
        out = []
        for eps in (1e-3, 1e-4):
            w = base.copy()
            w[1] = w[0] - eps
            out.append(np.array(mnl_gap_sandwich(w, 1, 2, 3)))
        np.testing.assert_allclose(out[0] / out[1], 10, rtol=1e-2)

    def test_order_required(self):
        with pytest.raises(DomainError):
            mnl_gap_sandwich([1, 2, 3], 1, 2, 2)


class TestKL:
    def test_example(self):
        compact, brute = kl_special_pair(6, 2, 2, 1.0, 0.5, 0.3, 10, 2, 4)
        assert abs(compact - brute) <= 1e-9 * (1 + brute)

    def test_same_instance(self):
        assert kl_special_pair(6, 3, 2, 1.0, 0.5, 0.3, 10, 3, 3) == (0.0, 0.0)

    def test_small_delta(self):
        compact, brute = kl_special_pair(6, 3, 2, 1.0, 1e-6, 0.3, 10, 2, 5)
        assert brute < 1e-9 and abs(compact - brute) <= 1e-12

    def test_indices(self):
        with pytest.raises(DomainError):
            kl_special_pair(6, 3, 3, 1.0, 0.5, 0.3, 10, 1, 4)


class TestConsistency:
    def test_mnl(self, rng):
        assert check_borda_consistency(mnl_model(rng.exponential(size=7)), 3).consistent

    def test_probit_mc(self):
        model = probit([1.0, 0.6, 0.3, 0.0, -0.4, -1.0])
        rep = check_borda_consistency(model, 3, rng=np.random.default_rng(6), menus_sampled=2000, draws_per_menu=10)
        assert rep.consistent and rep.adjudicated > 0

    def test_adversarial_tabular(self):
        table = TabularChoiceModel(3, {(1, 2): (0.2, 0.8), (1, 3): (0.6, 0.4), (2, 3): (0.7, 0.3)})
        rep = check_borda_consistency(table, 2, partworths=[3.0, 2.0, 1.0])
        assert not rep.consistent and (1, 2) in rep.violations
