"""Self-check suite of exact identities, each run on seeded random instances."""

from __future__ import annotations

import math
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from .choice_models import TabularChoiceModel, mnl_model, tabular_from_matrix
from .rankers import borda_count, mle_fit, ranking, spectral_scores, stationarity_residual
from .sampling import enumerate_menus
from .theory import (
    borda_scores_exact,
    check_borda_consistency,
    hardest_pair_ratio,
    kl_special_pair,
    mnl_gap_sandwich,
)

COUNTEREXAMPLE = np.array(
    [
        [0.5, 0.6, 0.55, 0.55],
        [0.2, 0.5, 0.85, 0.60],
        [0.45, 0.40, 0.5, 0.95],
        [0.45, 0.45, 0.15, 0.5],
    ]
)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    residual: float
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        extra = f"  {self.detail}" if self.detail else ""
        return f"{status}  {self.name:<28} residual={self.residual:.3e}{extra}"


def random_tabular(n: int, m: int, rng: np.random.Generator) -> TabularChoiceModel:
    """Tabular model with Dirichlet(1,...,1) probabilities on every size-``m`` menu."""
    return TabularChoiceModel(n, {menu: tuple(rng.dirichlet(np.ones(m))) for menu in enumerate_menus(n, m)})


def check_kl_identity(trials: int = 30, seed: int = 11, perturb: float = 1.0) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        n = int(rng.integers(3, 11))
        m = int(rng.integers(2, min(4, n) + 1))
        K = int(rng.integers(1, n))
        a, b = (int(x) for x in rng.choice(np.arange(K, n + 1), size=2, replace=n - K + 1 < 2))
        v, delta = float(rng.uniform(0.2, 3.0)), float(rng.uniform(0.05, 2.0))
        p, R = float(rng.uniform(0.05, 1.0)), int(rng.integers(1, 200))
        compact, brute = kl_special_pair(n, m, K, v, delta, p, R, a, b)
        worst = max(worst, abs(compact * perturb - brute) / (1 + brute))
    return CheckResult("kl_identity", worst <= 1e-9, worst, f"{trials} pairs")


def check_sandwich(trials: int = 200, seed: int = 12) -> CheckResult:
    rng = np.random.default_rng(seed)
    violations, slack = 0, math.inf
    for _ in range(trials):
        n = int(rng.integers(4, 11))
        m = int(rng.integers(2, n))
        w = np.exp(rng.normal(scale=rng.uniform(0.2, 2.0), size=n))
        i, j = sorted((int(x) for x in rng.choice(n, size=2, replace=False)), key=lambda k: -w[k])
        lower, exact, upper = mnl_gap_sandwich(w, i + 1, j + 1, m)
        violations += not (lower <= exact <= upper)
        slack = min(slack, exact - lower, upper - exact)
    return CheckResult("sandwich_bounds", violations == 0, float(violations), f"{trials} instances, min slack {slack:.3e}")


def check_simple_inequality(trials: int = 100, seed: int = 13) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        n = int(rng.integers(3, 11))
        m = int(rng.integers(2, n + 1))
        K = int(rng.integers(1, n))
        lhs, rhs = hardest_pair_ratio(borda_scores_exact(np.exp(rng.normal(size=n)), m), K)
        worst = max(worst, abs(lhs - rhs) / rhs)
    return CheckResult("simple_inequality", worst <= 1e-12, worst, f"{trials} score vectors")


def check_borda_sum(trials: int = 50, seed: int = 14) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        n = int(rng.integers(2, 13))
        m = int(rng.integers(2, n + 1))
        taus = borda_scores_exact(np.exp(rng.normal(size=n)), m).taus
        worst = max(worst, abs(taus.sum() - n / m))
    return CheckResult("borda_score_sum", worst <= 1e-10, worst, f"{trials} models")


def check_borda_mle(trials: int = 50, seed: int = 15) -> CheckResult:
    rng = np.random.default_rng(seed)
    mismatches, residual = 0, 0.0
    for _ in range(trials):
        n, m = int(rng.integers(4, 9)), int(rng.integers(2, 4))
        table = random_tabular(n, m, rng)
        U = mle_fit(table)
        residual = max(residual, stationarity_residual(U, table))
        mismatches += not np.array_equal(ranking(U), ranking(borda_scores_exact(table, m).taus))
    ok = mismatches == 0 and residual <= 1e-8
    return CheckResult("borda_mle_equivalence", ok, residual, f"{mismatches} order mismatches in {trials}")


def check_spectral(trials: int = 20, seed: int = 16) -> CheckResult:
    rng = np.random.default_rng(seed)
    mismatches = 0
    for _ in range(trials):
        n = int(rng.integers(3, 9))
        m = int(rng.integers(2, n + 1))
        u = rng.normal(size=n)
        mismatches += not np.array_equal(ranking(spectral_scores(mnl_model(np.exp(u)), m)), ranking(u))
    return CheckResult("spectral_consistency", mismatches == 0, float(mismatches), f"{trials} MNL models")


def check_mnl_consistency(trials: int = 20, seed: int = 17) -> CheckResult:
    rng = np.random.default_rng(seed)
    bad = 0
    for _ in range(trials):
        n = int(rng.integers(3, 10))
        m = int(rng.integers(2, n + 1))
        bad += not check_borda_consistency(mnl_model(np.exp(rng.normal(size=n))), m).consistent
    return CheckResult("borda_consistency_mnl", bad == 0, float(bad), f"{trials} MNL models")


def check_counterexample() -> CheckResult:
    table = tabular_from_matrix(COUNTEREXAMPLE, strict=False)
    got = {
        "borda": ranking(borda_count(table)).tolist(),
        "mle": ranking(mle_fit(table)).tolist(),
        "spectral": ranking(spectral_scores(table)).tolist(),
    }
    want = {"borda": [4, 3, 2, 1], "mle": [4, 3, 2, 1], "spectral": [4, 2, 3, 1]}
    wrong = sum(got[k] != want[k] for k in want)
    detail = " ".join(f"{k}={''.join(map(str, v))}" for k, v in got.items())
    return CheckResult("counterexample_divergence", wrong == 0, float(wrong), detail)


def run_checks(mutate_kl: bool = False) -> list[CheckResult]:
    """Run every check. ``mutate_kl`` perturbs the KL constant to show the suite can fail."""
    checks: list[Callable[[], CheckResult]] = [
        lambda: check_kl_identity(perturb=1.01 if mutate_kl else 1.0),
        check_sandwich,
        check_simple_inequality,
        check_borda_sum,
        check_borda_mle,
        check_spectral,
        check_mnl_consistency,
        check_counterexample,
    ]
    return [c() for c in checks]
