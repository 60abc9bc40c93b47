"""Top-K recovery algorithms: choice-based Borda count, MNL-MLE and spectral ranking.

All rankers accept a :class:`~choice_rank.sampling.ChoiceDataset`, a
:class:`~choice_rank.sampling.MenuCounts`, or a
:class:`~choice_rank.choice_models.TabularChoiceModel` (read as fractional
counts, i.e. the infinite-data limit). Ties are always broken toward the
lowest item label.
"""

from __future__ import annotations

import math
from collections.abc import Callable
from dataclasses import dataclass, field
from typing import Union

import numpy as np
import numpy.typing as npt
from scipy.sparse.csgraph import breadth_first_order

from . import kernels
from .choice_models import ParametricChoiceModel, TabularChoiceModel
from .errors import (
    ConvergenceError,
    DisconnectedError,
    DomainError,
    NumericalError,
    ReducibleChainError,
)
from .sampling import ChoiceDataset, MenuCounts, enumerate_menus

ScoreVector = npt.NDArray[np.float64]
TopKSet = frozenset
ChoiceData = Union[ChoiceDataset, MenuCounts, TabularChoiceModel]


def as_counts(data: ChoiceData) -> MenuCounts:
    """Aggregate any supported input into per-menu counts."""
    if isinstance(data, MenuCounts):
        return data
    if isinstance(data, ChoiceDataset):
        return data.aggregate()
    if isinstance(data, TabularChoiceModel):
        menus, probs = data.to_arrays()
        return MenuCounts(data.n, menus, probs, np.ones(menus.shape[0]))
    raise TypeError(f"unsupported choice data: {type(data).__name__}")


def ranking(scores: npt.ArrayLike) -> npt.NDArray[np.int64]:
    """Item labels ordered best-first; equal scores keep ascending label order."""
    s = np.asarray(scores, dtype=np.float64)
    return np.argsort(-s, kind="stable") + 1


def top_k(scores: npt.ArrayLike, K: int) -> TopKSet:
    """The ``K`` items with the largest scores."""
    s = np.asarray(scores)
    if not 1 <= K <= s.size:
        raise DomainError(f"K={K} must satisfy 1 <= K <= n={s.size}")
    return frozenset(int(i) for i in ranking(s)[:K])


# --------------------------------------------------------------------------
# Borda count


def borda_count(data: ChoiceData) -> ScoreVector:
    """Number of times each item was chosen (fractional for tabular input)."""
    if isinstance(data, ChoiceDataset):
        return kernels.count_choices(data.choices, data.n)
    return as_counts(data).wins()


# --------------------------------------------------------------------------
# MNL maximum likelihood


@dataclass(frozen=True)
class MleOptions:
    max_iters: int = 100_000
    gradient_tolerance: float = 1e-8
    method: str = "newton"
    armijo_c: float = 1e-4
    backtrack: float = 0.5

    def __post_init__(self) -> None:
        if self.gradient_tolerance <= 0:
            raise DomainError("gradient_tolerance must be positive")
        if self.max_iters < 1:
            raise DomainError("max_iters must be at least 1")
        if self.method not in ("newton", "gradient"):
            raise DomainError(f"unknown MLE method {self.method!r}")
        if not (0 < self.backtrack < 1 and 0 < self.armijo_c < 1):
            raise DomainError("line-search constants must lie in (0, 1)")


def _softmax_rows(logits: npt.NDArray[np.float64]) -> tuple[npt.NDArray[np.float64], npt.NDArray[np.float64]]:
    top = logits.max(axis=1, keepdims=True)
    e = np.exp(logits - top)
    z = e.sum(axis=1, keepdims=True)
    return e / z, (np.log(z) + top)[:, 0]


def mnl_log_likelihood(U: npt.ArrayLike, data: ChoiceData) -> tuple[float, ScoreVector]:
    """MNL log-likelihood of ``data`` at partworths ``U`` and its gradient."""
    counts = as_counts(data)
    U = np.asarray(U, dtype=np.float64)
    if U.shape != (counts.n,):
        raise DomainError(f"expected {counts.n} partworths, got shape {U.shape}")
    if counts.menus.shape[0] == 0:
        return 0.0, np.zeros(counts.n)
    logits = U[counts.menus - 1]
    probs, lse = _softmax_rows(logits)
    value = float(np.sum(counts.counts * logits) - np.sum(counts.totals * lse))
    grad = np.zeros(counts.n)
    np.add.at(grad, counts.menus - 1, counts.counts - counts.totals[:, None] * probs)
    return value, grad


def _hessian(U: ScoreVector, counts: MenuCounts) -> npt.NDArray[np.float64]:
    probs, _ = _softmax_rows(U[counts.menus - 1])
    block = probs[:, :, None] * probs[:, None, :]
    m = probs.shape[1]
    block[:, np.arange(m), np.arange(m)] -= probs
    block *= counts.totals[:, None, None]
    H = np.zeros((counts.n, counts.n))
    rows = np.broadcast_to(counts.menus[:, :, None] - 1, block.shape)
    cols = np.broadcast_to(counts.menus[:, None, :] - 1, block.shape)
    np.add.at(H, (rows, cols), block)
    return H


def comparison_components(data: ChoiceData) -> list[list[int]]:
    """Connected components of the graph linking items that share an observed menu."""
    counts = as_counts(data)
    parent = list(range(counts.n))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    observed = counts.menus[counts.totals > 0] - 1
    for row in observed.tolist():
        a = find(row[0])
        for b in row[1:]:
            rb = find(b)
            if rb != a:
                parent[rb] = a
    groups: dict[int, list[int]] = {}
    for i in range(counts.n):
        groups.setdefault(find(i), []).append(i + 1)
    return sorted(groups.values())


def _projected(grad: ScoreVector) -> ScoreVector:
    # the iterate lives on sum(U) = 0; for normalized data grad already sums to zero
    return grad - grad.mean()


def mle_fit(data: ChoiceData, options: MleOptions | None = None) -> ScoreVector:
    """MNL maximum-likelihood partworths, normalized to sum to zero.

    The likelihood is maximized over ``sum(U) = 0``. Iteration stops once
    the (projected) gradient's infinity norm is at most
    ``gradient_tolerance``. If rounding stalls the line search first, the
    fit is still accepted when ``|g_i| <= gradient_tolerance * N_i`` with
    ``N_i`` the count-weighted number of observed menus containing ``i``.

    Raises:
        DisconnectedError: the comparison graph has more than one component.
        ConvergenceError: the tolerance was not met; ``estimate`` holds the
            last iterate.
    """
    options = options or MleOptions()
    counts = as_counts(data)
    components = comparison_components(counts)
    if len(components) > 1:
        raise DisconnectedError(components)
    n = counts.n
    scale = np.maximum(1.0, counts.appearances())
    U = np.zeros(n)
    value, grad = mnl_log_likelihood(U, counts)
    grad = _projected(grad)
    step = 1.0 / max(1.0, 0.5 * float(scale.max()))
    residual = float(np.max(np.abs(grad)))
    it = 0
    for it in range(1, options.max_iters + 1):
        if residual <= options.gradient_tolerance:
            return U
        if options.method == "newton":
            neg_h = np.ones((n, n)) / n - _hessian(U, counts)
            try:
                direction = np.linalg.solve(neg_h, grad)
            except np.linalg.LinAlgError:
                direction = grad
            if grad @ direction <= 0:
                direction = grad
            t = 1.0
        else:
            direction = grad
            t = step * 2.0
        slope = float(grad @ direction)
        while True:
            cand = U + t * direction
            cand -= cand.mean()
            cand_value, cand_grad = mnl_log_likelihood(cand, counts)
            # slack of a few ulps so rounding in the value cannot block steps near the optimum
            slack = 8 * np.finfo(float).eps * max(1.0, abs(value)) if options.method == "newton" else 0.0
            if cand_value >= value + options.armijo_c * t * slope - slack:
                break
            t *= options.backtrack
            if t < 1e-30:
                if np.all(np.abs(grad) <= options.gradient_tolerance * scale):
                    return U
                raise ConvergenceError("line search stalled", residual, it, estimate=U)
        if options.method == "gradient":
            step = t
        U, value, grad = cand, cand_value, _projected(cand_grad)
        residual = float(np.max(np.abs(grad)))
    if residual <= options.gradient_tolerance:
        return U
    raise ConvergenceError("MLE did not converge", residual, it, estimate=U)


def stationarity_residual(U: npt.ArrayLike, data: ChoiceData) -> float:
    """``max_i |sum_S e^{U_i} / sum_{j in S} e^{U_j} - W_i|`` over observed menus.

    Measured on the sum-zero subspace, which only matters for tables whose
    menus do not sum to one.
    """
    return float(np.max(np.abs(_projected(mnl_log_likelihood(U, data)[1]))))


# --------------------------------------------------------------------------
# Spectral ranking


@dataclass(frozen=True)
class MarkovChain:
    matrix: npt.NDArray[np.float64]
    metadata: dict = field(default_factory=dict)


def _menu_probabilities(source, m: int | None) -> tuple[int, int, npt.NDArray[np.int64], npt.NDArray[np.float64], str]:
    if isinstance(source, ParametricChoiceModel):
        if m is None:
            raise DomainError("menu size m is required for a parametric model")
        menus = np.array(list(enumerate_menus(source.n, m)), dtype=np.int64)
        return source.n, m, menus, source.choice_probs(menus), "exact"
    mode = "exact" if isinstance(source, TabularChoiceModel) else "empirical"
    counts = as_counts(source)
    size = counts.menus.shape[1]
    if m is not None and m != size:
        raise DomainError(f"data has menu size {size}, not {m}")
    totals = counts.totals
    seen = totals > 0
    probs = counts.counts[seen] / totals[seen][:, None]
    if mode == "exact" and not source.normalized:
        mode = "raw"
    menus = counts.menus[seen]
    if mode != "empirical" and menus.shape[0] != math.comb(counts.n, size):
        mode = "empirical"
    return counts.n, size, menus, probs, mode


def build_markov_chain(source, m: int | None = None) -> MarkovChain:
    """Transition matrix ``M_ij = sum_{S ni i,j} rho(j|S) / C(n-1, m-1)``.

    Exact mode uses model probabilities on every menu; empirical mode uses
    observed choice fractions, unobserved menus contributing nothing.
    """
    n, size, menus, probs, mode = _menu_probabilities(source, m)
    M = kernels.accumulate_chain(menus, probs, n) / math.comb(n - 1, size - 1)
    off = M.sum(axis=1)
    metadata: dict = {"mode": mode, "n": n, "m": size, "damping": None}
    if np.any(1.0 - off < -1e-12):
        if mode == "exact":
            raise NumericalError("negative diagonal in exact-mode Markov chain")
        factor = 1.0 / (2.0 * float(off.max()))
        M *= factor
        off = M.sum(axis=1)
        metadata["damping"] = factor
    M[np.diag_indices(n)] = np.maximum(1.0 - off, 0.0)
    return MarkovChain(M, metadata)


def _unreachable_state(M: npt.NDArray[np.float64]) -> int | None:
    graph = (M > 0).astype(np.int8)
    n = M.shape[0]
    fwd = set(breadth_first_order(graph, 0, directed=True, return_predecessors=False).tolist())
    if len(fwd) < n:
        return min(set(range(n)) - fwd) + 1
    back = set(breadth_first_order(graph.T, 0, directed=True, return_predecessors=False).tolist())
    if len(back) < n:
        # item 1 cannot be reached from these states
        return 1
    return None


def stationary_distribution(
    M: npt.ArrayLike | MarkovChain,
    tolerance: float = 1e-13,
    max_iters: int = 1_000_000,
    check_irreducible: bool = True,
) -> ScoreVector:
    """Stationary distribution by power iteration from the uniform vector.

    Iterates the lazy chain ``(I + M) / 2``, which has the same stationary
    distribution and cannot be periodic.
    """
    if isinstance(M, MarkovChain):
        M = M.matrix
    M = np.asarray(M, dtype=np.float64)
    n = M.shape[0]
    if np.any(M < -1e-15) or np.max(np.abs(M.sum(axis=1) - 1.0)) > 1e-9:
        raise DomainError("matrix is not row-stochastic")
    if check_irreducible:
        state = _unreachable_state(M)
        if state is not None:
            raise ReducibleChainError(state)
    lazy = 0.5 * (M + np.eye(n))
    pi = np.full(n, 1.0 / n)
    residual = math.inf
    for it in range(1, max_iters + 1):
        nxt = pi @ lazy
        nxt /= nxt.sum()
        residual = float(np.abs(nxt @ M - nxt).sum())
        pi = nxt
        if residual <= tolerance:
            return pi
    raise ConvergenceError("power iteration did not converge", residual, max_iters, estimate=pi)


def spectral_scores(
    source, m: int | None = None, tolerance: float = 1e-13, check_irreducible: bool = True
) -> ScoreVector:
    """Stationary distribution of :func:`build_markov_chain` for ``source``."""
    return stationary_distribution(build_markov_chain(source, m), tolerance, check_irreducible=check_irreducible)


def spectral_rank(source, K: int, m: int | None = None) -> TopKSet:
    """Top-``K`` items by stationary probability of the choice Markov chain."""
    return top_k(spectral_scores(source, m), K)


ALGORITHMS: dict[str, Callable[[ChoiceData], ScoreVector]] = {
    "borda": borda_count,
    "mle": mle_fit,
    "spectral": spectral_scores,
}
