"""Pure numpy implementations of the hot loops.

Used when the compiled extension is unavailable or when
``CHOICE_RANK_PURE_PYTHON=1`` is set. Results are bit-identical to the
compiled versions for the integer kernels; floating-point kernels agree to
rounding (summation order differs).
"""

from __future__ import annotations

import itertools

import numpy as np
import numpy.typing as npt

_CHUNK = 1 << 15


def binomial_table(n: int, m: int) -> npt.NDArray[np.int64]:
    table = np.zeros((n + 1, m + 1), dtype=np.int64)
    for a in range(n + 1):
        table[a, 0] = 1
        for b in range(1, min(a, m) + 1):
            table[a, b] = table[a - 1, b - 1] + table[a - 1, b]
    return table


def count_choices(choices: npt.NDArray[np.int64], n: int) -> npt.NDArray[np.float64]:
    if choices.size and (choices.min() < 1 or choices.max() > n):
        raise ValueError(f"choice outside [1, {n}]")
    return np.bincount(choices - 1, minlength=n).astype(np.float64)


def unrank_combinations(ranks: npt.NDArray[np.int64], n: int, m: int) -> npt.NDArray[np.int64]:
    binom = binomial_table(n, m)
    r = ranks.astype(np.int64, copy=True)
    out = np.empty((r.size, m), dtype=np.int64)
    v = np.zeros(r.size, dtype=np.int64)
    for t in range(m):
        while True:
            b = binom[n - 1 - v, m - 1 - t]
            step = r >= b
            if not step.any():
                break
            r[step] -= b[step]
            v[step] += 1
        out[:, t] = v + 1
        v += 1
    return out


def rank_combinations(menus: npt.NDArray[np.int64], n: int) -> npt.NDArray[np.int64]:
    m = menus.shape[1]
    binom = binomial_table(n, m)
    out = np.zeros(menus.shape[0], dtype=np.int64)
    start = np.zeros(menus.shape[0], dtype=np.int64)
    for t in range(m):
        # prefix[x] = sum_{v < x} C(n-1-v, m-1-t)
        col = binom[n - 1 - np.arange(n), m - 1 - t]
        prefix = np.concatenate(([0], np.cumsum(col)))
        c = menus[:, t] - 1
        out += prefix[c] - prefix[start]
        start = c + 1
    return out


def _menu_chunks(n: int, m: int, chunk: int = _CHUNK):
    combos = itertools.combinations(range(n), m)
    while True:
        flat = np.fromiter(
            itertools.chain.from_iterable(itertools.islice(combos, chunk)), dtype=np.int64
        )
        if flat.size == 0:
            return
        yield flat.reshape(-1, m)


def mnl_borda_sums(weights: npt.NDArray[np.float64], m: int) -> npt.NDArray[np.float64]:
    n = weights.shape[0]
    out = np.zeros(n, dtype=np.float64)
    for idx in _menu_chunks(n, m):
        w = weights[idx]
        np.add.at(out, idx, w / w.sum(axis=1, keepdims=True))
    return out


def accumulate_chain(
    menus: npt.NDArray[np.int64], probs: npt.NDArray[np.float64], n: int
) -> npt.NDArray[np.float64]:
    out = np.zeros((n, n), dtype=np.float64)
    m = menus.shape[1]
    for a in range(m):
        for b in range(m):
            if a != b:
                np.add.at(out, (menus[:, a] - 1, menus[:, b] - 1), probs[:, b])
    return out


def menu_win_mass(
    tiers: npt.NDArray[np.int64], multiplicity: npt.NDArray[np.int64], m: int, scale: int
) -> npt.NDArray[np.int64]:
    R, n = tiers.shape
    blocks = []
    chunk = max(1, (1 << 22) // max(1, R * m))
    for idx in _menu_chunks(n, m, chunk):
        sub = tiers[:, idx]  # (R, C', m)
        best = sub.min(axis=2, keepdims=True)
        top = sub == best
        ties = top.sum(axis=2, keepdims=True)
        share = multiplicity[:, None, None] * (scale // ties)
        blocks.append(np.where(top, share, 0).sum(axis=0))
    if not blocks:
        return np.zeros((0, m), dtype=np.int64)
    return np.concatenate(blocks).astype(np.int64)
