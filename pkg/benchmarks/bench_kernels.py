"""Compare the compiled kernels with the numpy fallback.

Usage: ``python benchmarks/bench_kernels.py [--repeats 5] [--quick]``.
Prints one line per kernel with the median time of each backend and the
speedup, after checking that both backends return the same values.
"""

from __future__ import annotations

import argparse
import math
import statistics
import time

import numpy as np

from choice_rank.kernels import available_backends


def _median_time(fn, repeats: int) -> float:
    fn()
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return statistics.median(times)


def cases(quick: bool):
    rng = np.random.default_rng(0)
    scale = 1 if quick else 4
    n, m = 20, 4
    choices = rng.integers(1, n + 1, size=250_000 * scale)
    total = math.comb(30, 5)
    ranks = rng.integers(0, total, size=50_000 * scale).astype(np.int64)
    weights = np.exp(rng.normal(size=18 + 2 * scale))
    menus = np.sort(np.argsort(rng.random((20_000 * scale, n)), axis=1)[:, :m] + 1, axis=1).astype(np.int64)
    probs = rng.dirichlet(np.ones(m), size=menus.shape[0])
    tiers = np.argsort(rng.random((400 * scale, 10)), axis=1).astype(np.int64) // 2
    mult = rng.integers(1, 5, size=tiers.shape[0]).astype(np.int64)
    return [
        ("count_choices", lambda k: k.count_choices(choices, n)),
        ("unrank_combinations", lambda k: k.unrank_combinations(ranks, 30, 5)),
        ("rank_combinations", lambda k: k.rank_combinations(menus, n)),
        ("mnl_borda_sums", lambda k: k.mnl_borda_sums(weights, 6)),
        ("accumulate_chain", lambda k: k.accumulate_chain(menus, probs, n)),
        ("menu_win_mass", lambda k: k.menu_win_mass(tiers, mult, 4, 12)),
    ]


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--quick", action="store_true", help="smaller inputs")
    args = parser.parse_args()
    backends = available_backends()
    if "cython" not in backends:
        raise SystemExit("compiled extension not built; run `pip install -e . --no-build-isolation` first")
    py, cy = backends["python"], backends["cython"]
    print(f"{'kernel':<22}{'python (s)':>12}{'cython (s)':>12}{'speedup':>10}")
    for name, call in cases(args.quick):
        np.testing.assert_allclose(np.asarray(call(py)), np.asarray(call(cy)), rtol=1e-12, atol=0)
        t_py = _median_time(lambda: call(py), args.repeats)
        t_cy = _median_time(lambda: call(cy), args.repeats)
        print(f"{name:<22}{t_py:>12.4g}{t_cy:>12.4g}{t_py / t_cy:>9.1f}x")


if __name__ == "__main__":
    main()
