import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from choice_rank.choice_models import (
    NoiseFamily,
    ParametricChoiceModel,
    PartworthVector,
    TabularChoiceModel,
    hard_instance_mnl,
    mc_choice_prob,
    mnl_choice_prob,
    mnl_model,
    sample_choice,
    sample_choices,
    tabular_from_matrix,
)
from choice_rank.errors import DomainError, ParseError, ValidationError
from conftest import SEEDS


def model(u, noise=NoiseFamily.GUMBEL):
    return ParametricChoiceModel(PartworthVector(np.array(u, dtype=float)), noise)


class TestPartworths:
    def test_invariants(self):
        with pytest.raises(ValidationError):
            PartworthVector(np.array([1.0]))
        with pytest.raises(ValidationError):
            PartworthVector(np.array([1.0, np.inf]))
        pw = PartworthVector(np.array([0.5, -1.0, 2.0]))
        assert pw.non_degenerate and pw.u_max == 2.0 and pw.u_min == -1.0
        assert not PartworthVector(np.array([1.0, 1.0, 0.0])).non_degenerate

    def test_negative_partworths_accepted(self):
        assert model([-3.0, -5.0]).n == 2

    def test_weights_positive(self):
        assert np.all(model([-800.0, 0.0]).weights >= 0)


class TestMnlChoiceProb:
    def test_examples(self):
        assert mnl_choice_prob([1, 1, 1], {1, 2, 3}, 1) == pytest.approx(1 / 3)
        assert mnl_choice_prob([2, 1], {1, 2}, 1) == pytest.approx(2 / 3)
        w = hard_instance_mnl(4, 1, 1.0, 1.0, {1})
        assert mnl_choice_prob(w, {1, 4}, 1) == pytest.approx(2 / 3)

    def test_errors(self):
        with pytest.raises(DomainError):
            mnl_choice_prob([1, 1, 1], {1, 2}, 3)
        with pytest.raises(DomainError):
            mnl_choice_prob([1, 0, 1], {1, 2}, 1)


class TestSampling:
    def test_symmetric_pair(self):
        rng = np.random.default_rng(SEEDS[0])
        p, _ = mc_choice_prob(model([0.0, 0.0]), (1, 2), 1, 100_000, rng)
        assert abs(p - 0.5) <= 3 * 0.5 / math.sqrt(1e5)

    def test_gumbel_is_mnl(self):
        rng = np.random.default_rng(SEEDS[1])
        p, _ = mc_choice_prob(model([math.log(2), 0.0]), (1, 2), 1, 100_000, rng)
        sigma = math.sqrt(2 / 9 / 1e5)
        assert abs(p - 2 / 3) <= 3 * sigma

    def test_normal_against_independent_mc(self):
        m = model([1.0, 0.0, -1.0], NoiseFamily.NORMAL)
        rng = np.random.default_rng(SEEDS[0])
        draws = sample_choices(m, np.tile([1, 2, 3], (100_000, 1)), rng)
        for item in (1, 2, 3):
            freq = np.mean(draws == item)
            p, se = mc_choice_prob(m, (1, 2, 3), item, 100_000, np.random.default_rng(SEEDS[2]))
            pooled = math.hypot(se, math.sqrt(freq * (1 - freq) / 1e5))
            assert abs(freq - p) <= 3 * pooled

    def test_mnl_equivalence_randomized(self):
        rng = np.random.default_rng(SEEDS[1])
        for _ in range(10):
            n = int(rng.integers(2, 7))
            u = rng.normal(size=n)
            size = int(rng.integers(2, n + 1))
            menu = tuple(sorted(rng.choice(np.arange(1, n + 1), size=size, replace=False).tolist()))
            item = int(rng.choice(menu))
            p, se = mc_choice_prob(model(u), menu, item, 100_000, rng)
            assert abs(p - mnl_choice_prob(np.exp(u), menu, item)) <= 4 * max(se, 1e-4)

    @pytest.mark.parametrize("noise", [NoiseFamily.GUMBEL, NoiseFamily.NORMAL])
    def test_order_preserving(self, noise):
        rng = np.random.default_rng(SEEDS[2])
        for _ in range(8):
            n = 5
            u = rng.normal(size=n)
            menu = tuple(sorted(rng.choice(np.arange(1, n + 1), size=3, replace=False).tolist()))
            i, j = sorted(menu[:2], key=lambda k: -u[k - 1])
            pi, si = mc_choice_prob(model(u, noise), menu, i, 50_000, rng)
            pj, sj = mc_choice_prob(model(u, noise), menu, j, 50_000, rng)
            if abs(pi - pj) > 4 * math.hypot(si, sj):
                assert pi > pj

    def test_exponential_support(self):
        eps = NoiseFamily.EXPONENTIAL.sample(np.random.default_rng(0), 10_000)
        assert eps.min() >= 0

    def test_deterministic(self):
        m = model([0.3, 0.1, -0.2])
        menus = np.tile([1, 2, 3], (50, 1))
        a = sample_choices(m, menus, np.random.default_rng(5))
        b = sample_choices(m, menus, np.random.default_rng(5))
        np.testing.assert_array_equal(a, b)

    def test_degenerate_menu(self):
        with pytest.raises(DomainError):
            sample_choice(model([0.0, 1.0]), (1,), np.random.default_rng(0))

    def test_ties_go_to_lowest_label(self):
        m = model([0.0, 0.0])

        class Zero:
            def random(self, size=None):
                return np.full(size, 0.5)

        assert sample_choice(m, (1, 2), Zero()) == 1

    def test_mc_zero_samples(self):
        with pytest.raises(DomainError):
            mc_choice_prob(model([0.0, 0.0]), (1, 2), 1, 0, np.random.default_rng(0))

    def test_tabular_sampling(self):
        table = TabularChoiceModel(3, {(1, 2): (0.9, 0.1), (1, 2, 3): (0.2, 0.3, 0.5)})
        rng = np.random.default_rng(SEEDS[0])
        draws = sample_choices(table, np.tile([1, 2, 3], (40_000, 1)), rng)
        for item, p in zip((1, 2, 3), (0.2, 0.3, 0.5)):
            assert abs(np.mean(draws == item) - p) <= 4 * math.sqrt(p * (1 - p) / 40_000)


class TestTabular:
    def test_validation(self):
        with pytest.raises(ValidationError):
            TabularChoiceModel(3, {(1, 2): (0.5, 0.6)})
        with pytest.raises(ValidationError):
            TabularChoiceModel(3, {(1, 4): (0.5, 0.5)})
        with pytest.raises(ValidationError):
            TabularChoiceModel(3, {(1,): (1.0,)})

    def test_canonical_lookup(self):
        t = TabularChoiceModel(3, {(2, 1): (0.3, 0.7)})
        assert t.choice_prob(1, (2, 1)) == pytest.approx(0.7)
        assert t.choice_prob(2, [1, 2]) == pytest.approx(0.3)

    def test_from_matrix(self):
        t = tabular_from_matrix([[0.5, 0.5], [0.5, 0.5]])
        assert t.choice_prob(1, (1, 2)) == 0.5
        with pytest.raises(ValidationError, match=r"P\[1,2\]"):
            tabular_from_matrix([[0.5, 0.6], [0.5, 0.5]])

    def test_counterexample_reading(self, counterexample):
        with pytest.raises(ValidationError):
            tabular_from_matrix(counterexample)
        raw = tabular_from_matrix(counterexample, strict=False)
        # P[i, j] is the probability of j from {i, j}
        assert raw.choice_prob(3, (2, 3)) == 0.85
        assert raw.choice_prob(2, (2, 3)) == 0.40
        assert not raw.normalized
        upper = tabular_from_matrix(counterexample, upper=True)
        assert upper.choice_prob(2, (2, 3)) == pytest.approx(0.15)

    def test_roundtrip(self, tmp_path, counterexample):
        t = TabularChoiceModel(4, {(1, 2, 3): (0.1, 0.2, 0.7), (2, 4): (1 / 3, 2 / 3)})
        assert TabularChoiceModel.loads(t.dumps()).probs.keys() == t.probs.keys()
        for path in (tmp_path / "t.txt", tmp_path / "t.txt.gz"):
            t.save(path)
            back = TabularChoiceModel.load(path)
            for menu in t.probs:
                assert tuple(back.probs[menu]) == tuple(t.probs[menu])
        raw = tabular_from_matrix(counterexample, strict=False)
        again = TabularChoiceModel.loads(raw.dumps())
        assert not again.normalized and again.dumps() == raw.dumps()

    def test_parse_errors(self):
        with pytest.raises(ParseError, match="line 2"):
            TabularChoiceModel.loads("# n=3\n2;1,2;0.5\n")


class TestHardInstance:
    def test_examples(self):
        np.testing.assert_array_equal(hard_instance_mnl(4, 2, 1.0, 0.5, {1, 2}), [1.5, 1.5, 1, 1])
        np.testing.assert_array_equal(hard_instance_mnl(3, 1, 2.0, 1.0, {3}), [2, 2, 3])
        with pytest.raises(DomainError):
            hard_instance_mnl(4, 1, 1.0, 0.0, {1})
        with pytest.raises(DomainError):
            hard_instance_mnl(4, 4, 1.0, 1.0, {1, 2, 3, 4})


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=2, max_size=7), st.data())
def test_mnl_menu_probabilities_sum_to_one(u, data):
    m = mnl_model(np.exp(u))
    size = data.draw(st.integers(2, len(u)))
    menu = sorted(data.draw(st.sets(st.integers(1, len(u)), min_size=size, max_size=size)))
    assert m.choice_probs(np.array([menu])).sum() == pytest.approx(1.0, abs=1e-12)
