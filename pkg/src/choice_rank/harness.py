"""Top-K recovery experiments: accuracy over trials, edit distance and timing.

Each trial generates data once at the largest sample size on the grid and
evaluates smaller sizes on nested subsets obtained by lowering the offer
probability, so a menu offered at a small budget is also offered at every
larger one.

Configuration files are flat ``key = value`` text; ``#`` starts a comment
and lists are comma separated. Recognized keys:

``model``
    ``mnl``, ``probit``, ``exponential`` or ``tabular``.
``n``, ``m``, ``K``, ``sample_sizes``, ``trials``, ``algorithms``, ``seed``
    Problem size, menu sizes, top-set sizes, expected-sample-size grid,
    number of trials, rankers to run and the base seed.
``R``
    Rounds per dataset (default 100). The offer probability for a target
    size ``N`` is ``N / (R * C(n, m))``.
``weights`` / ``partworths``
    Fixed MNL weights or partworths. Without them partworths are drawn
    i.i.d. standard normal from ``partworth_seed``.
``redraw_partworths``
    Draw a fresh partworth vector in every trial (default false).
``tabular``, ``truth``
    Model file and ``rank,item`` ground-truth file for ``model = tabular``.
``threads``
    Trials run concurrently on this many threads.
``timing``
    Record wall times (default true). Times are the only
    non-reproducible column; with ``timing = false`` it is left empty.
"""

from __future__ import annotations

import math
import statistics
import time
from collections.abc import Callable, Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import numpy.typing as npt

from .choice_models import NoiseFamily, ParametricChoiceModel, PartworthVector, TabularChoiceModel, _open_text
from .errors import ConvergenceError, DisconnectedError, DomainError, ParseError, ValidationError
from .preflib import GroundTruth, RankingDataset, empirical_choice_probs, load_ordering
from .rankers import borda_count, mle_fit, spectral_scores, top_k
from .sampling import ChoiceDataset, SamplingConfig, enumerate_menus, simulate_dataset

ALGORITHM_ORDER = ("borda", "mle", "spectral")
CSV_HEADER = "algorithm,n,m,K,expected_samples,trials,successes,accuracy,median_time_s"
_NOISE = {"mnl": NoiseFamily.GUMBEL, "probit": NoiseFamily.NORMAL, "exponential": NoiseFamily.EXPONENTIAL}


def edit_distance(est: Iterable[int], truth: Iterable[int]) -> int:
    """``K - |est & truth|`` for two top-``K`` sets."""
    est, truth = frozenset(est), frozenset(truth)
    if len(est) != len(truth):
        raise DomainError(f"sets differ in size: {len(est)} vs {len(truth)}")
    return len(truth) - len(est & truth)


def exact_topk_accuracy(successes: int, trials: int) -> float:
    """Fraction of trials whose estimated top set equals the true one."""
    if trials < 1:
        raise DomainError("trials must be at least 1")
    if not 0 <= successes <= trials:
        raise DomainError(f"successes={successes} outside [0, {trials}]")
    return successes / trials


def _scores(algorithm: str, data: ChoiceDataset) -> npt.NDArray[np.float64]:
    if algorithm == "borda":
        return borda_count(data)
    if algorithm == "mle":
        try:
            return mle_fit(data)
        except ConvergenceError as exc:
            return exc.estimate
    if algorithm == "spectral":
        return spectral_scores(data, tolerance=1e-10, check_irreducible=False)
    raise DomainError(f"unknown algorithm {algorithm!r}")


def run_algorithm(algorithm: str, data: ChoiceDataset) -> npt.NDArray[np.float64] | None:
    """Scores for one ranker on finite data, or ``None`` when it has no estimate.

    MLE without convergence falls back to its last iterate; a disconnected
    comparison graph yields ``None``, counted as a failed trial.
    """
    try:
        return _scores(algorithm, data)
    except DisconnectedError:
        return None


def time_algorithms(
    data: ChoiceDataset, algorithms: Sequence[str] = ALGORITHM_ORDER, repeats: int = 5
) -> dict[str, float]:
    """Median wall time in seconds of each ranker over ``repeats`` sequential runs."""
    if repeats < 1:
        raise DomainError("repeats must be at least 1")
    out = {}
    for alg in algorithms:
        run_algorithm(alg, data)  # warm-up
        times = []
        for _ in range(repeats):
            start = time.perf_counter()
            run_algorithm(alg, data)
            times.append(time.perf_counter() - start)
        out[alg] = statistics.median(times)
    return out


def _parse_list(value: str, cast: Callable = int) -> tuple:
    return tuple(cast(v.strip()) for v in value.split(",") if v.strip())


def _parse_bool(value: str) -> bool:
    v = value.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {value!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    n: int
    m_values: tuple[int, ...]
    K_values: tuple[int, ...]
    sample_sizes: tuple[float, ...]
    trials: int = 100
    algorithms: tuple[str, ...] = ALGORITHM_ORDER
    seed: int = 0
    R: int = 100
    model: str = "mnl"
    weights: tuple[float, ...] | None = None
    partworths: tuple[float, ...] | None = None
    partworth_seed: int = 0
    redraw_partworths: bool = False
    tabular: str | None = None
    truth: str | None = None
    threads: int = 1
    timing: bool = True

    def __post_init__(self) -> None:
        if self.trials < 1:
            raise ValidationError("trials must be at least 1")
        if not self.sample_sizes or any(b <= a for a, b in zip(self.sample_sizes, self.sample_sizes[1:])):
            raise ValidationError("sample_sizes must be nonempty and strictly increasing")
        if self.sample_sizes[0] <= 0:
            raise ValidationError("sample sizes must be positive")
        if not self.m_values or not self.K_values:
            raise ValidationError("m and K lists must be nonempty")
        if self.R < 1:
            raise ValidationError("R must be at least 1")
        unknown = set(self.algorithms) - set(ALGORITHM_ORDER)
        if unknown or not self.algorithms:
            raise ValidationError(f"algorithms must be a nonempty subset of {ALGORITHM_ORDER}")
        if self.model not in (*_NOISE, "tabular"):
            raise ValidationError(f"unknown model {self.model!r}")
        for m in self.m_values:
            if not 2 <= m <= self.n:
                raise ValidationError(f"menu size m={m} must satisfy 2 <= m <= n={self.n}")
        for K in self.K_values:
            if not 1 <= K <= self.n:
                raise ValidationError(f"K={K} must satisfy 1 <= K <= n={self.n}")
        for key in ("weights", "partworths"):
            vals = getattr(self, key)
            if vals is not None and len(vals) != self.n:
                raise ValidationError(f"{key} has {len(vals)} entries but n={self.n}")
        if self.weights is not None and self.model != "mnl":
            raise ValidationError("weights are only meaningful for the mnl model")

    def offer_probability(self, m: int, target: float) -> float:
        """``p`` realizing an expected ``target`` observations with menu size ``m``."""
        p = target / (self.R * math.comb(self.n, m))
        if p > 1:
            raise DomainError(
                f"target {target:g} exceeds R*C(n,m) = {self.R * math.comb(self.n, m)} for m={m}"
            )
        return p

    @classmethod
    def loads(cls, text: str) -> ExperimentConfig:
        ints = {"n", "trials", "seed", "R", "partworth_seed", "threads"}
        lists = {"m": ("m_values", int), "K": ("K_values", int), "sample_sizes": ("sample_sizes", float),
                 "weights": ("weights", float), "partworths": ("partworths", float)}
        kwargs: dict = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParseError("expected 'key = value'", lineno)
            key, value = (s.strip() for s in line.split("=", 1))
            try:
                if key in ints:
                    kwargs[key] = int(value)
                elif key in lists:
                    name, cast = lists[key]
                    kwargs[name] = _parse_list(value, cast)
                elif key == "algorithms":
                    kwargs[key] = _parse_list(value, str)
                elif key in ("redraw_partworths", "timing"):
                    kwargs[key] = _parse_bool(value)
                elif key in ("model", "tabular", "truth"):
                    kwargs[key] = value
                else:
                    raise ParseError(f"unknown key {key!r}", lineno)
            except ValueError as exc:
                raise ParseError(f"{key}: {exc}", lineno) from None
        missing = {"n", "m_values", "K_values", "sample_sizes"} - kwargs.keys()
        if missing:
            raise ValidationError(f"config lacks required keys: {', '.join(sorted(missing))}")
        return cls(**kwargs)

    @classmethod
    def load(cls, path: str | Path) -> ExperimentConfig:
        with _open_text(path, "r") as fh:
            return cls.loads(fh.read())

    def dumps(self) -> str:
        def fmt(v):
            if isinstance(v, tuple):
                return ",".join(fmt(x) for x in v)
            if isinstance(v, bool):
                return "true" if v else "false"
            if isinstance(v, float):
                return f"{v:.17g}"
            return str(v)

        names = {"m_values": "m", "K_values": "K"}
        lines = []
        for f in self.__dataclass_fields__:
            value = getattr(self, f)
            if value is not None:
                lines.append(f"{names.get(f, f)} = {fmt(value)}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class ResultRow:
    algorithm: str
    n: int
    m: int
    K: int
    expected_samples: float
    trials: int
    successes: int
    median_time_s: float | None = None

    @property
    def accuracy(self) -> float:
        return exact_topk_accuracy(self.successes, self.trials)

    def csv(self) -> str:
        t = "" if self.median_time_s is None else f"{self.median_time_s:.6e}"
        return (
            f"{self.algorithm},{self.n},{self.m},{self.K},{self.expected_samples:.10g},"
            f"{self.trials},{self.successes},{self.accuracy:.6g},{t}"
        )


@dataclass(frozen=True)
class ExperimentResult:
    rows: tuple[ResultRow, ...]
    notes: tuple[str, ...] = field(default=())

    def to_csv(self) -> str:
        return "\n".join([CSV_HEADER] + [r.csv() for r in self.rows]) + "\n"

    def save(self, path: str | Path) -> None:
        with _open_text(path, "w") as fh:
            fh.write(self.to_csv())

    def accuracy(self, algorithm: str, m: int, K: int) -> list[float]:
        """Accuracy along the sample grid for one (algorithm, m, K)."""
        return [r.accuracy for r in self.rows if (r.algorithm, r.m, r.K) == (algorithm, m, K)]


def derive_seed(base: int, *key: int) -> int:
    """Stable 63-bit seed for a (trial, menu size, ...) key."""
    state = np.random.SeedSequence(base, spawn_key=tuple(int(k) for k in key)).generate_state(2, np.uint64)
    return int(state[0] >> np.uint64(1))


def _partworths(config: ExperimentConfig, trial: int) -> npt.NDArray[np.float64]:
    if config.weights is not None:
        return np.log(np.asarray(config.weights, dtype=np.float64))
    if config.partworths is not None:
        return np.asarray(config.partworths, dtype=np.float64)
    key = (trial,) if config.redraw_partworths else ()
    rng = np.random.default_rng(np.random.SeedSequence(config.partworth_seed, spawn_key=key))
    return rng.standard_normal(config.n)


def _trial(
    config: ExperimentConfig,
    trial: int,
    model_for: Callable[[int, int], object],
    truth_for: Callable[[int, int], frozenset[int]],
) -> dict[tuple[str, int, int, int], tuple[bool, float]]:
    out = {}
    for m in config.m_values:
        model = model_for(trial, m)
        p_max = config.offer_probability(m, config.sample_sizes[-1])
        full = simulate_dataset(model, SamplingConfig(config.n, m, p_max, config.R, derive_seed(config.seed, trial, m)))
        for g, target in enumerate(config.sample_sizes):
            data = full.thin(config.offer_probability(m, target))
            for alg in config.algorithms:
                start = time.perf_counter()
                scores = run_algorithm(alg, data)
                elapsed = time.perf_counter() - start
                for K in config.K_values:
                    ok = scores is not None and top_k(scores, K) == truth_for(trial, K)
                    out[(alg, m, K, g)] = (ok, elapsed)
    return out


def _collect(config: ExperimentConfig, run_trial: Callable[[int], dict]) -> ExperimentResult:
    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            results = list(pool.map(run_trial, range(config.trials)))
    else:
        results = [run_trial(t) for t in range(config.trials)]
    rows = []
    for alg in (a for a in ALGORITHM_ORDER if a in config.algorithms):
        for m in sorted(config.m_values):
            for K in sorted(config.K_values):
                for g, target in enumerate(config.sample_sizes):
                    hits = [res[(alg, m, K, g)] for res in results]
                    t = statistics.median(h[1] for h in hits) if config.timing else None
                    rows.append(ResultRow(alg, config.n, m, K, target, config.trials, sum(h[0] for h in hits), t))
    return ExperimentResult(tuple(rows))


def run_synthetic(config: ExperimentConfig) -> ExperimentResult:
    """Accuracy of each ranker under a parametric random utility model.

    The true top set is read off the partworths, which must be distinct
    within the top ``max(K) + 1`` positions.
    """
    if config.model == "tabular":
        raise DomainError("run_synthetic needs a parametric model; use run_real for tabular models")
    for m in config.m_values:
        config.offer_probability(m, config.sample_sizes[-1])
    noise = _NOISE[config.model]
    cache: dict[int, npt.NDArray[np.float64]] = {}

    def partworths(trial: int) -> npt.NDArray[np.float64]:
        key = trial if (config.redraw_partworths and config.weights is None and config.partworths is None) else -1
        if key not in cache:
            cache[key] = _partworths(config, trial)
        return cache[key]

    def model_for(trial: int, m: int) -> ParametricChoiceModel:
        return ParametricChoiceModel(PartworthVector(partworths(trial)), noise)

    def truth_for(trial: int, K: int) -> frozenset[int]:
        u = partworths(trial)
        ordered = np.sort(u)[::-1]
        if K < u.size and ordered[K - 1] == ordered[K]:
            raise DomainError(f"true top-{K} set is not unique")
        return top_k(u, K)

    # fill the cache up front so threads only read it
    for t in range(config.trials if config.redraw_partworths else 1):
        partworths(t)
    return _collect(config, lambda t: _trial(config, t, model_for, truth_for))


def _tabular_for_m(source, m: int) -> TabularChoiceModel:
    if isinstance(source, RankingDataset):
        return empirical_choice_probs(source, m)
    if isinstance(source, TabularChoiceModel):
        table = source
    else:
        if m not in source:
            raise DomainError(f"no tabular model for menu size {m}")
        table = source[m]
    for menu in enumerate_menus(table.n, m):
        if menu not in table.probs:
            raise DomainError(f"tabular model has no probabilities for menu {menu}")
    if not table.normalized:
        raise DomainError("cannot sample from an unnormalized tabular model")
    return table


def run_real(source, truth, config: ExperimentConfig) -> ExperimentResult:
    """Accuracy of each ranker on data sampled from an empirical model.

    ``source`` is a :class:`TabularChoiceModel` (one menu size), a mapping
    from menu size to such a model, or a :class:`RankingDataset` from which
    one model per menu size is built. ``truth`` is the best-first ordering,
    a :class:`GroundTruth` or a path to a ``rank,item`` file.
    """
    if isinstance(truth, (str, Path)):
        truth = load_ordering(truth)
    ordering = truth.ordering if isinstance(truth, GroundTruth) else tuple(int(i) for i in truth)
    if sorted(ordering) != list(range(1, config.n + 1)):
        raise ValidationError(f"ground truth must order items 1..{config.n}")
    tables = {m: _tabular_for_m(source, m) for m in config.m_values}
    for m, table in tables.items():
        if table.n != config.n:
            raise DomainError(f"model has {table.n} items but config has n={config.n}")
        config.offer_probability(m, config.sample_sizes[-1])
    return _collect(
        config,
        lambda t: _trial(config, t, lambda _t, m: tables[m], lambda _t, K: frozenset(ordering[:K])),
    )


def run_config(config: ExperimentConfig) -> ExperimentResult:
    """Dispatch on ``config.model``; tabular configs read ``tabular`` and ``truth`` files."""
    if config.model != "tabular":
        return run_synthetic(config)
    if not config.tabular or not config.truth:
        raise ValidationError("tabular experiments need 'tabular' and 'truth' files")
    table = TabularChoiceModel.load(config.tabular, config.n)
    return run_real(table, config.truth, config)

