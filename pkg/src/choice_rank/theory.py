"""Generalized Borda scores, gaps, sample-complexity bounds and related identities.

Exact quantities are computed by enumerating every size-``m`` menu; the
enumeration is capped at :data:`MAX_EXACT_MENUS` menus. Models without
closed-form choice probabilities go through :func:`borda_scores_mc`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import numpy.typing as npt

from . import kernels
from .choice_models import ChoiceModel, ParametricChoiceModel, TabularChoiceModel, mnl_model, sample_choices
from .errors import DomainError
from .sampling import enumerate_menus

MAX_EXACT_MENUS = 10**7


@dataclass(frozen=True)
class BordaScoreVector:
    """Generalized Borda scores ``tau_i`` for one menu size.

    ``se`` holds per-item standard errors in Monte-Carlo mode and is
    ``None`` for exact scores.
    """

    taus: npt.NDArray[np.float64]
    m: int
    mode: str = "exact"
    se: npt.NDArray[np.float64] | None = None
    samples: tuple[int, int] | None = None

    @property
    def n(self) -> int:
        return int(self.taus.size)


def _as_model(model) -> ChoiceModel:
    if isinstance(model, (ParametricChoiceModel, TabularChoiceModel)):
        return model
    return mnl_model(model)


def borda_scores_exact(model, m: int) -> BordaScoreVector:
    """``tau_i = sum_{S ni i} p(i|S) / C(n-1, m-1)`` by full enumeration.

    ``model`` is an MNL :class:`ParametricChoiceModel`, a
    :class:`TabularChoiceModel` covering every size-``m`` menu, or a bare
    weight vector.
    """
    model = _as_model(model)
    n = model.n
    if not 2 <= m <= n:
        raise DomainError(f"menu size m={m} must satisfy 2 <= m <= n={n}")
    if math.comb(n, m) > MAX_EXACT_MENUS:
        raise DomainError(f"C({n},{m}) menus exceeds the exact-enumeration cap; use borda_scores_mc")
    norm = math.comb(n - 1, m - 1)
    if isinstance(model, ParametricChoiceModel):
        if not model.is_mnl:
            raise DomainError(f"{model.noise.value} noise needs borda_scores_mc")
        u = model.partworths.values
        sums = kernels.mnl_borda_sums(np.exp(u - u.max()), m)
        return BordaScoreVector(sums / norm, m)
    sums = np.zeros(n)
    for menu in enumerate_menus(n, m):
        if menu not in model.probs:
            raise DomainError(f"tabular model has no probabilities for menu {menu}")
        sums[np.array(menu) - 1] += model.probs[menu]
    return BordaScoreVector(sums / norm, m)


def borda_scores_mc(
    model: ChoiceModel,
    m: int,
    menus_sampled: int,
    draws_per_menu: int,
    rng: np.random.Generator,
) -> BordaScoreVector:
    """Unbiased Monte-Carlo generalized Borda scores.

    For each item ``i``, ``menus_sampled`` menus are drawn uniformly from
    the menus containing ``i`` and ``draws_per_menu`` choices are simulated
    on each. The standard error comes from the spread of per-menu win
    frequencies, so it covers both sources of noise.
    """
    n = model.n
    if not 2 <= m <= n:
        raise DomainError(f"menu size m={m} must satisfy 2 <= m <= n={n}")
    if menus_sampled < 1 or draws_per_menu < 1:
        raise DomainError("menus_sampled and draws_per_menu must be at least 1")
    taus = np.empty(n)
    se = np.empty(n)
    for i in range(1, n + 1):
        others = np.array([k for k in range(1, n + 1) if k != i], dtype=np.int64)
        pick = np.argsort(rng.random((menus_sampled, n - 1)), axis=1)[:, : m - 1]
        menus = np.sort(np.column_stack([others[pick], np.full(menus_sampled, i)]), axis=1)
        reps = np.repeat(menus, draws_per_menu, axis=0)
        wins = (sample_choices(model, reps, rng) == i).reshape(menus_sampled, draws_per_menu)
        freq = wins.mean(axis=1)
        taus[i - 1] = freq.mean()
        if menus_sampled > 1:
            se[i - 1] = freq.std(ddof=1) / math.sqrt(menus_sampled)
        else:
            se[i - 1] = math.sqrt(freq[0] * (1 - freq[0]) / draws_per_menu)
    return BordaScoreVector(taus, m, "monte-carlo", se, (menus_sampled, draws_per_menu))


def _taus(taus) -> npt.NDArray[np.float64]:
    return np.asarray(taus.taus if isinstance(taus, BordaScoreVector) else taus, dtype=np.float64)


@dataclass(frozen=True)
class GapReport:
    """Gap and complexity factors for top-``K`` recovery at one menu size."""

    K: int
    m: int
    delta_K: float
    factor_one: float
    factor_two: float
    h: int | None = None
    delta_K_h: float | None = None
    flags: tuple[str, ...] = field(default=())

    @property
    def positive_gap(self) -> bool:
        return self.delta_K > 0


def _approx_gap(ordered: npt.NDArray[np.float64], K: int, h: int, index_rule: str) -> float:
    # 1-based positions in the descending order
    upper = K - h if index_rule == "K-h" else K - h - 1
    lower = K + h + 1
    n = ordered.size
    if index_rule not in ("K-h", "K-h-1"):
        raise DomainError(f"unknown index rule {index_rule!r}")
    if upper < 1 or lower > n:
        raise DomainError(f"h={h} out of range for K={K}, n={n} under rule {index_rule}")
    return float(ordered[upper - 1] - ordered[lower - 1])


def gap_report(taus, K: int, m: int | None = None, h: int | None = None, index_rule: str = "K-h") -> GapReport:
    """Gap ``tau_(K) - tau_(K+1)`` of the descending scores and the two complexity factors.

    ``factor_one`` is ``1 / (m * delta_K)`` and ``factor_two`` is
    ``tau_(K+1) / delta_K``; both are infinite for a nonpositive gap, which
    is also flagged. With ``h`` the approximate-recovery gap
    ``tau_(K-h) - tau_(K+h+1)`` is added (``index_rule="K-h-1"`` selects
    ``tau_(K-h-1)`` instead).
    """
    if m is None:
        if not isinstance(taus, BordaScoreVector):
            raise DomainError("menu size m is required for a bare score array")
        m = taus.m
    ordered = np.sort(_taus(taus))[::-1]
    n = ordered.size
    if not 1 <= K < n:
        raise DomainError(f"K={K} must satisfy 1 <= K < n={n}")
    delta = float(ordered[K - 1] - ordered[K])
    flags = []
    if delta > 0:
        f1, f2 = 1.0 / (m * delta), float(ordered[K]) / delta
    else:
        f1 = f2 = math.inf
        flags.append("nonpositive-gap")
    delta_h = None
    if h is not None:
        if h < 0:
            raise DomainError("h must be nonnegative")
        delta_h = _approx_gap(ordered, K, h, index_rule)
        if delta_h <= 0:
            flags.append("nonpositive-approximate-gap")
    return GapReport(K, m, delta, f1, f2, h, delta_h, tuple(flags))


def exact_recovery_bound(taus, K: int, m: int) -> float:
    """Expected sample size ``pR C(n,m)`` sufficient for exact top-``K`` recovery.

    ``8 n ln(n) / (m delta_K^2) * (delta_K + 2 tau_(K+1))``.
    """
    t = _taus(taus)
    n = t.size
    rep = gap_report(t, K, m)
    if not rep.positive_gap:
        raise DomainError("exact-recovery bound needs a positive gap")
    tau_next = np.sort(t)[::-1][K]
    return 8 * n * math.log(n) / (m * rep.delta_K**2) * (rep.delta_K + 2 * tau_next)


def approx_recovery_bound(taus, K: int, h: int, m: int, index_rule: str = "K-h") -> float:
    """Sample size sufficient for top-``K`` recovery within edit distance ``h``.

    ``8 n ln(n) / (m delta_{K,h}) * (1 + tau_(K+h+1) / delta_{K,h})``.
    """
    t = _taus(taus)
    n = t.size
    ordered = np.sort(t)[::-1]
    if not 1 <= K < n:
        raise DomainError(f"K={K} must satisfy 1 <= K < n={n}")
    gap = _approx_gap(ordered, K, h, index_rule)
    if gap <= 0:
        raise DomainError("approximate-recovery bound needs a positive gap")
    return 8 * n * math.log(n) / (m * gap) * (1 + ordered[K + h] / gap)


def exact_recovery_lower_bound(taus, K: int, m: int) -> float:
    """Sample size below which some MNL instance defeats every estimator.

    ``n ln(n) / 8 * (tau_(K+1) + delta_K) / (m delta_K^2)``.
    """
    t = _taus(taus)
    n = t.size
    rep = gap_report(t, K, m)
    if not rep.positive_gap:
        raise DomainError("lower bound needs a positive gap")
    tau_next = np.sort(t)[::-1][K]
    return n * math.log(n) / 8 * (tau_next + rep.delta_K) / (m * rep.delta_K**2)


def pairwise_error_bound(tau_i: float, tau_j: float, n: int, m: int, expected_samples: float) -> float:
    """Upper bound on the probability that Borda counts put ``j`` above ``i``."""
    if tau_i <= tau_j:
        raise DomainError("need tau_i > tau_j")
    return math.exp(-3 * expected_samples * (m * (tau_i - tau_j)) ** 2 / (8 * n * (tau_i + tau_j)))


def hardest_pair_ratio(taus, K: int) -> tuple[float, float]:
    """``(tau_K + tau_{K+1}) / delta_K^2`` and the max of the same ratio over top/bottom pairs."""
    ordered = np.sort(_taus(taus))[::-1]
    top, bottom = ordered[:K], ordered[K:]
    lhs = (ordered[K - 1] + ordered[K]) / (ordered[K - 1] - ordered[K]) ** 2
    ratio = (top[:, None] + bottom[None, :]) / (top[:, None] - bottom[None, :]) ** 2
    return float(lhs), float(ratio.max())


def mnl_gap_sandwich(weights: npt.ArrayLike, i: int, j: int, m: int) -> tuple[float, float, float]:
    """``(lower, exact, upper)`` for ``m * (tau_i - tau_j)`` under an MNL model.

    Both bounds are evaluated in scale-free form: the lower bound on weights
    rescaled so the mean weight of the items other than ``i`` and ``j`` is
    one, the upper bound on weights rescaled so the smallest weight is one.
    """
    w = np.asarray(weights, dtype=np.float64)
    n = w.size
    if n < 3:
        raise DomainError("need at least three items")
    if not 2 <= m <= n:
        raise DomainError(f"menu size m={m} must satisfy 2 <= m <= n={n}")
    if np.any(w <= 0):
        raise DomainError("weights must be positive")
    wi, wj = w[i - 1], w[j - 1]
    if wi <= wj:
        raise DomainError(f"need w_{i} > w_{j}")
    taus = borda_scores_exact(w, m).taus
    exact = m * (taus[i - 1] - taus[j - 1])

    lo = w / np.delete(w, [i - 1, j - 1]).mean()
    lo_i, lo_j, lo_min = lo[i - 1], lo[j - 1], lo.min()
    lower = (lo_i - lo_j) * n / (n - 1) * (1 - lo_i / (m - 1 + lo_i)) * (1 - (lo_j / lo_min) / (m - 1 + lo_j / lo_min))

    up = w / w.min()
    up_i, up_j, up_max = up[i - 1], up[j - 1], up.max()
    upper = (up_i - up_j) * n / (n - 1) * (1 - (up_j - 1) / (m - 1 + up_j)) * (1 - (up_i / up_max) / (m - 1 + up_i / up_max))
    return float(lower), float(exact), float(upper)


def _hard_pair_weights(n: int, K: int, v: float, delta: float, a: int) -> npt.NDArray[np.float64]:
    w = np.full(n, float(v))
    w[: K - 1] += delta
    w[a - 1] = v + delta
    return w


def kl_special_pair(
    n: int, m: int, K: int, v: float, delta: float, p: float, R: int, a: int, b: int
) -> tuple[float, float]:
    """Compact and brute-force KL divergence between two hard MNL instances.

    Instance ``a`` puts weight ``v + delta`` on items ``1..K-1`` and on
    ``a``; every other item has weight ``v``. Returns
    ``(p R ln((v+delta)/v) C(n-1,m-1) (tau_a - tau_b), p R sum_S KL(S))``
    with the scores taken under instance ``a``.
    """
    if not (K <= a <= n and K <= b <= n):
        raise DomainError(f"a and b must lie in [{K}, {n}]")
    if not 1 <= K < n or not 2 <= m <= n:
        raise DomainError("need 1 <= K < n and 2 <= m <= n")
    if v <= 0 or delta <= 0:
        raise DomainError("need v > 0 and delta > 0")
    wa = _hard_pair_weights(n, K, v, delta, a)
    wb = _hard_pair_weights(n, K, v, delta, b)
    taus = borda_scores_exact(wa, m).taus
    compact = p * R * math.log((v + delta) / v) * math.comb(n - 1, m - 1) * (taus[a - 1] - taus[b - 1])
    menus = np.array(list(enumerate_menus(n, m)), dtype=np.int64) - 1
    pa = wa[menus] / wa[menus].sum(axis=1, keepdims=True)
    pb = wb[menus] / wb[menus].sum(axis=1, keepdims=True)
    brute = p * R * float(np.sum(pa * np.log(pa / pb)))
    return float(compact), brute


@dataclass(frozen=True)
class ConsistencyReport:
    consistent: bool
    violations: list[tuple[int, int]]
    adjudicated: int
    skipped: int


def check_borda_consistency(
    model,
    m: int,
    partworths: npt.ArrayLike | None = None,
    scores: BordaScoreVector | None = None,
    rng: np.random.Generator | None = None,
    menus_sampled: int = 2000,
    draws_per_menu: int = 20,
) -> ConsistencyReport:
    """Check that the order of the generalized Borda scores matches the partworth order.

    Exact scores are used when the model admits them; otherwise Monte-Carlo
    scores, and only pairs separated by more than four pooled standard
    errors are adjudicated. ``partworths`` defaults to the model's own.
    """
    if partworths is None:
        if not isinstance(model, ParametricChoiceModel):
            raise DomainError("partworths must be supplied for a tabular model")
        partworths = model.partworths.values
    u = np.asarray(partworths, dtype=np.float64)
    if scores is None:
        closed = isinstance(model, TabularChoiceModel) or getattr(model, "is_mnl", False)
        if closed:
            scores = borda_scores_exact(model, m)
        else:
            scores = borda_scores_mc(model, m, menus_sampled, draws_per_menu, rng or np.random.default_rng(0))
    t = scores.taus
    violations, judged, skipped = [], 0, 0
    for i in range(u.size):
        for j in range(i + 1, u.size):
            if u[i] == u[j]:
                continue
            diff = t[i] - t[j]
            if scores.se is not None:
                pooled = math.hypot(scores.se[i], scores.se[j])
                if abs(diff) <= 4 * pooled:
                    skipped += 1
                    continue
            judged += 1
            if np.sign(diff) != np.sign(u[i] - u[j]):
                violations.append((i + 1, j + 1))
    return ConsistencyReport(not violations, violations, judged, skipped)
