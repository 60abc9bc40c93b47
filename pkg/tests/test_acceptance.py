"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The lines are collected again in a summary section at the end of the pytest
run, so they are visible without ``-s``.
"""

import itertools
import math
import time
from contextlib import contextmanager
from fractions import Fraction

import numpy as np
import pytest

import corpus
from conftest import ACCEPTANCE_LINES
from choice_rank.choice_models import mnl_model, tabular_from_matrix
from choice_rank.harness import ExperimentConfig, run_synthetic, time_algorithms
from choice_rank.preflib import menu_win_fractions, parse_rankings
from choice_rank.rankers import borda_count, mle_fit, mnl_log_likelihood, ranking, spectral_scores, stationarity_residual
from choice_rank.sampling import ChoiceDataset, SamplingConfig, simulate_dataset
from choice_rank.theory import borda_scores_exact, gap_report, hardest_pair_ratio, kl_special_pair, mnl_gap_sandwich
from choice_rank.verify import random_tabular


@contextmanager
def criterion(number: int, name: str, limit_s: float):
    """Time the body, then print and record one PASS/FAIL line."""
    state = {"detail": ""}
    start = time.perf_counter()
    ok = False
    try:
        yield state
        ok = True
    finally:
        elapsed = time.perf_counter() - start
        within = elapsed < limit_s
        status = "PASS" if ok and within else "FAIL"
        note = state["detail"] if ok else "assertion failed"
        if not within:
            note += f"; exceeded {limit_s:g}s"
        line = f"{status} {number}: {name} ({elapsed:.2f}s) {note}".rstrip()
        print(line)
        ACCEPTANCE_LINES.append(line)
    assert within, f"runtime {elapsed:.1f}s over the {limit_s}s limit"


def enumerated_taus(w, m):
    """Independent exact Borda scores for MNL weights by plain itertools enumeration."""
    n = len(w)
    sums = [0.0] * n
    for menu in itertools.combinations(range(n), m):
        z = sum(w[k] for k in menu)
        for k in menu:
            sums[k] += w[k] / z
    c = math.comb(n - 1, m - 1)
    return np.array([s / c for s in sums])


def test_counterexample_divergence(counterexample):
    with criterion(1, "counterexample divergence", 1.0) as st:
        table = tabular_from_matrix(counterexample, strict=False)
        got = {
            "borda": ranking(borda_count(table)).tolist(),
            "mle": ranking(mle_fit(table)).tolist(),
            "spectral": ranking(spectral_scores(table)).tolist(),
        }
        st["detail"] = " ".join(f"{k}={''.join(map(str, v))}" for k, v in got.items())
        assert got == {"borda": [4, 3, 2, 1], "mle": [4, 3, 2, 1], "spectral": [4, 2, 3, 1]}


def test_borda_mle_equivalence():
    with criterion(2, "Borda/MLE equivalence on 50 tabular models", 60.0) as st:
        rng = np.random.default_rng(2)
        mismatches, worst = 0, 0.0
        for _ in range(50):
            n, m = int(rng.integers(4, 9)), int(rng.choice([2, 3]))
            table = random_tabular(n, m, rng)
            U = mle_fit(table)
            worst = max(worst, stationarity_residual(U, table))
            mismatches += not np.array_equal(ranking(U), ranking(borda_count(table)))
        st["detail"] = f"mismatches={mismatches} max residual={worst:.2e}"
        assert mismatches == 0 and worst <= 1e-8


def test_spectral_consistency():
    with criterion(3, "spectral consistency on 20 MNL models", 30.0) as st:
        rng = np.random.default_rng(3)
        mismatches = 0
        for _ in range(20):
            n = int(rng.integers(3, 9))
            m = int(rng.integers(2, n + 1))
            u = rng.normal(size=n)
            mismatches += not np.array_equal(ranking(spectral_scores(mnl_model(np.exp(u)), m)), ranking(u))
        st["detail"] = f"mismatches={mismatches}"
        assert mismatches == 0


def test_kl_compact_identity():
    with criterion(4, "KL compact identity on 30 pairs", 30.0) as st:
        rng = np.random.default_rng(4)
        worst = 0.0
        for _ in range(30):
            n = int(rng.integers(3, 11))
            m = int(rng.integers(2, min(4, n) + 1))
            K = int(rng.integers(1, n - 1))
            a, b = (int(x) for x in rng.choice(np.arange(K, n + 1), size=2, replace=False))
            v, delta = rng.uniform(0.2, 3.0), rng.uniform(0.05, 2.0)
            p, R = rng.uniform(0.05, 1.0), int(rng.integers(1, 500))
            compact, brute = kl_special_pair(n, m, K, v, delta, p, R, a, b)
            worst = max(worst, abs(compact - brute) / (1 + brute))
        st["detail"] = f"max relative error={worst:.2e}"
        assert worst <= 1e-9


def test_sandwich_bounds():
    with criterion(5, "sandwich bounds on 200 MNL instances", 60.0) as st:
        rng = np.random.default_rng(5)
        violations, oracle_err = 0, 0.0
        for _ in range(200):
            n = int(rng.integers(4, 11))
            m = int(rng.integers(2, n))
            w = np.exp(rng.normal(scale=rng.uniform(0.2, 2.0), size=n))
            i, j = sorted(rng.choice(n, size=2, replace=False), key=lambda k: -w[k])
            lower, exact, upper = mnl_gap_sandwich(w, int(i) + 1, int(j) + 1, m)
            taus = enumerated_taus(w.tolist(), m)
            oracle_err = max(oracle_err, abs(exact - m * (taus[i] - taus[j])))
            violations += not (lower <= exact <= upper)
        st["detail"] = f"violations={violations} oracle error={oracle_err:.1e}"
        assert violations == 0 and oracle_err <= 1e-12


def test_simple_inequality():
    with criterion(6, "hardest-pair identity on 100 score vectors", 10.0) as st:
        rng = np.random.default_rng(6)
        worst = 0.0
        for _ in range(100):
            n = int(rng.integers(3, 11))
            m = int(rng.integers(2, n + 1))
            K = int(rng.integers(1, n))
            taus = enumerated_taus(np.exp(rng.normal(size=n)).tolist(), m)
            s = np.sort(taus)[::-1]
            brute = max((s[a] + s[b]) / (s[a] - s[b]) ** 2 for a in range(K) for b in range(K, n))
            lhs, rhs = hardest_pair_ratio(taus, K)
            worst = max(worst, abs(lhs - brute) / brute, abs(rhs - brute) / brute)
        st["detail"] = f"max relative error={worst:.2e}"
        assert worst <= 1e-12


def test_menu_size_monotonicity():
    with criterion(7, "menu-size monotonicity, n=15 K=3", 300.0) as st:
        good = 0
        for seed in range(5):
            u = np.random.default_rng(seed).standard_normal(15)
            reps = [gap_report(borda_scores_exact(mnl_model(np.exp(u)), m), 3, m=m) for m in range(2, 9)]
            ok = True
            for factor in (np.array([r.factor_one for r in reps]), np.array([r.factor_two for r in reps])):
                d = np.diff(factor)
                ok &= bool(np.all(d < 0) and np.all(np.diff(d) > 0))
            good += ok
        st["detail"] = f"{good}/5 instances monotone and convex"
        assert good >= 4


def test_synthetic_recovery():
    with criterion(8, "synthetic Borda recovery, n=20", 600.0) as st:
        grid = (2000, 5000, 10000, 20000, 50000, 100000, 180000)
        config = ExperimentConfig(
            n=20, m_values=(2, 4), K_values=(1, 3), sample_sizes=grid, trials=20, algorithms=("borda",),
            R=1000, seed=0, partworth_seed=0, timing=False, threads=4,
        )
        result = run_synthetic(config)
        mid = len(grid) // 2
        parts = []
        ok = True
        for K in (1, 3):
            a2, a4 = result.accuracy("borda", 2, K), result.accuracy("borda", 4, K)
            ok &= max(a2[-1], a4[-1]) >= 0.95 and min(a2[-1], a4[-1]) >= 0.95
            ok &= a4[mid] >= a2[mid] - 0.1
            parts.append(f"K={K}: final m2={a2[-1]:.2f} m4={a4[-1]:.2f}, at N={grid[mid]} m2={a2[mid]:.2f} m4={a4[mid]:.2f}")
        st["detail"] = "; ".join(parts)
        assert ok


def test_mle_gradient_and_closed_form():
    with criterion(9, "MLE gradient and two-item closed form", 30.0) as st:
        rng = np.random.default_rng(9)
        worst = 0.0
        for k in range(50):
            n = int(rng.integers(3, 9))
            m = int(rng.integers(2, n + 1))
            model = mnl_model(np.exp(rng.normal(size=n)))
            data = simulate_dataset(model, SamplingConfig(n, m, 0.5, 5, seed=k))
            U = rng.normal(size=n)
            _, grad = mnl_log_likelihood(U, data)
            h = 1e-5
            fd = np.empty(n)
            for i in range(n):
                e = np.zeros(n)
                e[i] = h
                fd[i] = (mnl_log_likelihood(U + e, data)[0] - mnl_log_likelihood(U - e, data)[0]) / (2 * h)
            worst = max(worst, np.linalg.norm(grad - fd) / max(np.linalg.norm(grad), 1e-300))
        two = ChoiceDataset.from_observations(2, [((1, 2), 1), ((1, 2), 1), ((1, 2), 2)])
        U = mle_fit(two)
        gap_err = abs(U[0] - U[1] - math.log(2))
        st["detail"] = f"max FD relative error={worst:.2e} closed-form error={gap_err:.1e}"
        assert worst <= 1e-6 and gap_err <= 1e-6


def test_fractional_win_ingestion():
    with criterion(10, "fractional-win ingestion", 1.0) as st:
        rankings = parse_rankings(corpus.TEXT)
        mismatched = 0
        for m, expected in corpus.EXPECTED.items():
            got = menu_win_fractions(rankings, m)
            for menu, fracs in expected.items():
                assert all(isinstance(x, Fraction) for x in got[menu])
                mismatched += got[menu] != fracs
            mismatched += any(sum(v) != 1 for v in got.values())
        st["detail"] = f"mismatched menus={mismatched}"
        assert mismatched == 0


def test_timing_ordering():
    with criterion(11, "Borda at least 10x faster than MLE", 300.0) as st:
        model = mnl_model(np.exp(np.random.default_rng(11).normal(size=20)))
        data = simulate_dataset(model, SamplingConfig(20, 4, 1.0, 21, seed=11))
        assert len(data) >= 100_000
        times = time_algorithms(data, ("borda", "mle"), repeats=5)
        ratio = times["mle"] / times["borda"]
        st["detail"] = f"N={len(data)} borda={times['borda']:.2e}s mle={times['mle']:.2e}s ratio={ratio:.0f}"
        assert times["borda"] <= times["mle"] / 10


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
