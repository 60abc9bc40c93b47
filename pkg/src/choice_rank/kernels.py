"""Backend selection for the hot loops.

The compiled extension is used when importable. Setting the environment
variable ``CHOICE_RANK_PURE_PYTHON=1`` forces the numpy fallback.
:data:`BACKEND` records which one was picked.
"""

from __future__ import annotations

import math
import os
from types import ModuleType

import numpy as np
import numpy.typing as npt

from . import _pykernels

_INT64_MAX = np.iinfo(np.int64).max


def _load() -> tuple[ModuleType, str]:
    if os.environ.get("CHOICE_RANK_PURE_PYTHON", "") not in ("", "0"):
        return _pykernels, "python"
    try:
        from . import _ckernels  # type: ignore[attr-defined]
    except ImportError:
        return _pykernels, "python"
    return _ckernels, "cython"


_impl, BACKEND = _load()


def available_backends() -> dict[str, ModuleType]:
    """All importable kernel modules keyed by name; used by tests and benchmarks."""
    out: dict[str, ModuleType] = {"python": _pykernels}
    try:
        from . import _ckernels  # type: ignore[attr-defined]
    except ImportError:
        pass
    else:
        out["cython"] = _ckernels
    return out


def _check_combination_space(n: int, m: int) -> int:
    total = math.comb(n, m)
    if total > _INT64_MAX:
        raise OverflowError(f"C({n},{m}) does not fit in a 64-bit index")
    return total


def count_choices(choices: npt.ArrayLike, n: int) -> npt.NDArray[np.float64]:
    """Number of times each item (1-based) appears in ``choices``."""
    arr = np.ascontiguousarray(choices, dtype=np.int64)
    return _impl.count_choices(arr, n)


def unrank_combinations(ranks: npt.ArrayLike, n: int, m: int) -> npt.NDArray[np.int64]:
    """Map lexicographic ranks in ``[0, C(n,m))`` to sorted 1-based menus."""
    total = _check_combination_space(n, m)
    arr = np.ascontiguousarray(ranks, dtype=np.int64)
    if arr.size and (arr.min() < 0 or arr.max() >= total):
        raise ValueError(f"rank outside [0, C({n},{m}))")
    return _impl.unrank_combinations(arr, n, m)


def rank_combinations(menus: npt.ArrayLike, n: int) -> npt.NDArray[np.int64]:
    """Inverse of :func:`unrank_combinations`."""
    arr = np.ascontiguousarray(menus, dtype=np.int64)
    if arr.ndim != 2:
        raise ValueError("menus must be a 2-D array")
    _check_combination_space(n, arr.shape[1])
    return _impl.rank_combinations(arr, n)


def mnl_borda_sums(weights: npt.ArrayLike, m: int) -> npt.NDArray[np.float64]:
    """For each item i, the sum over all size-``m`` menus S containing i of w_i / w(S)."""
    arr = np.ascontiguousarray(weights, dtype=np.float64)
    return _impl.mnl_borda_sums(arr, m)


def accumulate_chain(menus: npt.ArrayLike, probs: npt.ArrayLike, n: int) -> npt.NDArray[np.float64]:
    """Matrix A with A[i,j] = sum over menus containing both i and j of prob(j | S)."""
    return _impl.accumulate_chain(
        np.ascontiguousarray(menus, dtype=np.int64),
        np.ascontiguousarray(probs, dtype=np.float64),
        n,
    )


def menu_win_mass(tiers: npt.ArrayLike, multiplicity: npt.ArrayLike, m: int, scale: int) -> npt.NDArray[np.int64]:
    """Scaled integer win mass per (menu, member), menus in lexicographic order.

    ``tiers[r, i]`` is the tier index of item ``i+1`` in record ``r`` (0 is
    best). ``scale`` must be divisible by every possible tie size.
    """
    return _impl.menu_win_mass(
        np.ascontiguousarray(tiers, dtype=np.int64),
        np.ascontiguousarray(multiplicity, dtype=np.int64),
        m,
        int(scale),
    )
