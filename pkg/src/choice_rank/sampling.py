"""Menu enumeration and the multi-round uniform sampling model."""

from __future__ import annotations

import itertools
import math
from collections.abc import Iterable, Iterator
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import numpy.typing as npt

from . import kernels
from .choice_models import ChoiceModel, Menu, _open_text, make_menu, sample_choices
from .errors import DomainError, ParseError, ValidationError

MAX_TRIALS = 10**9
_DENSE_CHUNK = 1 << 20
# below this offer probability, rounds draw a Binomial count and then distinct menu ranks
_SPARSE_BELOW = 0.02


def _check_nm(n: int, m: int) -> None:
    if not 2 <= m <= n:
        raise DomainError(f"menu size m={m} must satisfy 2 <= m <= n={n}")


def enumerate_menus(n: int, m: int) -> Iterator[Menu]:
    """All size-``m`` menus over items ``1..n`` in lexicographic order."""
    _check_nm(n, m)
    return itertools.combinations(range(1, n + 1), m)


def menus_containing(n: int, m: int, i: int) -> Iterator[Menu]:
    """All size-``m`` menus containing item ``i``, in lexicographic order."""
    _check_nm(n, m)
    if not 1 <= i <= n:
        raise DomainError(f"item {i} outside [1, {n}]")
    others = [k for k in range(1, n + 1) if k != i]
    for rest in itertools.combinations(others, m - 1):
        yield tuple(sorted(rest + (i,)))


@dataclass(frozen=True)
class SamplingConfig:
    n: int
    m: int
    p: float
    R: int
    seed: int = 0
    allow_large: bool = False

    def __post_init__(self) -> None:
        _check_nm(self.n, self.m)
        if not 0 < self.p <= 1:
            raise DomainError(f"offer probability p={self.p} must lie in (0, 1]")
        if self.R < 1:
            raise DomainError(f"rounds R={self.R} must be at least 1")

    @property
    def num_menus(self) -> int:
        return math.comb(self.n, self.m)


def expected_sample_size(config: SamplingConfig) -> float:
    """Expected number of observations, ``p * R * C(n, m)``."""
    return config.p * config.R * config.num_menus


@dataclass(frozen=True)
class MenuCounts:
    """Aggregated choice data: per distinct menu, a (possibly fractional) count per member.

    ``menu_mass`` is the number of times each menu was offered. It defaults
    to the row sums of ``counts``; exact-probability tables set it to one.
    """

    n: int
    menus: npt.NDArray[np.int64]
    counts: npt.NDArray[np.float64]
    menu_mass: npt.NDArray[np.float64] | None = None

    @property
    def totals(self) -> npt.NDArray[np.float64]:
        if self.menu_mass is not None:
            return self.menu_mass
        return self.counts.sum(axis=1)

    def wins(self) -> npt.NDArray[np.float64]:
        out = np.zeros(self.n)
        np.add.at(out, self.menus - 1, self.counts)
        return out

    def appearances(self) -> npt.NDArray[np.float64]:
        """Count-weighted number of observed menus each item sits in."""
        out = np.zeros(self.n)
        np.add.at(out, self.menus - 1, np.broadcast_to(self.totals[:, None], self.menus.shape))
        return out


@dataclass(frozen=True)
class ChoiceDataset:
    """Observations ``(menu, chosen item)`` with the round each was offered in.

    ``offer_draws`` holds, for simulated data, the uniform draw that decided
    each menu's inclusion; :meth:`thin` uses it to produce nested subsets.
    """

    n: int
    menus: npt.NDArray[np.int64]
    choices: npt.NDArray[np.int64]
    rounds: npt.NDArray[np.int64] | None = None
    offer_draws: npt.NDArray[np.float64] | None = None

    def __post_init__(self) -> None:
        menus = np.asarray(self.menus, dtype=np.int64)
        if menus.ndim != 2:
            menus = menus.reshape(0, 2) if menus.size == 0 else menus
        choices = np.asarray(self.choices, dtype=np.int64).reshape(-1)
        if menus.shape[0] != choices.shape[0]:
            raise ValidationError("menus and choices differ in length")
        if menus.size:
            if menus.min() < 1 or menus.max() > self.n:
                raise ValidationError(f"menu items outside [1, {self.n}]")
            if np.any(np.diff(menus, axis=1) <= 0):
                raise ValidationError("menus must be strictly increasing")
            member = (menus == choices[:, None]).any(axis=1)
            if not member.all():
                bad = int(np.flatnonzero(~member)[0])
                raise ValidationError(
                    f"observation {bad}: chosen item {choices[bad]} not in menu {tuple(menus[bad])}"
                )
        rounds = np.ones(choices.size, dtype=np.int64) if self.rounds is None else np.asarray(self.rounds, dtype=np.int64)
        object.__setattr__(self, "menus", menus)
        object.__setattr__(self, "choices", choices)
        object.__setattr__(self, "rounds", rounds)

    @classmethod
    def from_observations(cls, n: int, observations: Iterable[tuple[Iterable[int], int]]) -> ChoiceDataset:
        obs = [(make_menu(s, n), int(y)) for s, y in observations]
        sizes = {len(s) for s, _ in obs}
        if len(sizes) > 1:
            raise ValidationError("all observations in a dataset must share one menu size")
        m = sizes.pop() if sizes else 2
        menus = np.array([s for s, _ in obs], dtype=np.int64).reshape(-1, m)
        return cls(n, menus, np.array([y for _, y in obs], dtype=np.int64))

    def __len__(self) -> int:
        return int(self.choices.size)

    @property
    def m(self) -> int:
        return int(self.menus.shape[1])

    def observations(self) -> Iterator[tuple[Menu, int]]:
        for row, y in zip(self.menus.tolist(), self.choices.tolist()):
            yield tuple(row), y

    def thin(self, p: float) -> ChoiceDataset:
        """Observations whose inclusion draw is below ``p`` (nested in ``p``)."""
        if self.offer_draws is None:
            raise DomainError("dataset carries no inclusion draws; only simulated data can be thinned")
        keep = self.offer_draws < p
        return ChoiceDataset(self.n, self.menus[keep], self.choices[keep], self.rounds[keep], self.offer_draws[keep])

    def aggregate(self) -> MenuCounts:
        """Collapse repeated menus into per-member choice counts."""
        m = self.m
        if len(self) == 0:
            return MenuCounts(self.n, np.zeros((0, m), dtype=np.int64), np.zeros((0, m)))
        keys = kernels.rank_combinations(self.menus, self.n)
        uniq, first, inv = np.unique(keys, return_index=True, return_inverse=True)
        pos = np.argmax(self.menus == self.choices[:, None], axis=1)
        counts = np.zeros((uniq.size, m))
        np.add.at(counts, (inv, pos), 1.0)
        return MenuCounts(self.n, self.menus[first], counts)

    def dumps(self) -> str:
        lines = [f"# n={self.n}"]
        m = self.m
        for r, row, y in zip(self.rounds.tolist(), self.menus.tolist(), self.choices.tolist()):
            lines.append(f"{r};{m};{','.join(map(str, row))};{y}")
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str, n: int | None = None) -> ChoiceDataset:
        header_n = None
        rows: list[list[int]] = []
        menus: list[list[int]] = []
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if body.startswith("n="):
                    header_n = int(body[2:])
                continue
            parts = line.split(";")
            if len(parts) != 4:
                raise ParseError("expected 'r;m;i1,...,im;y'", lineno)
            try:
                r, m, y = int(parts[0]), int(parts[1]), int(parts[3])
                items = [int(x) for x in parts[2].split(",")]
            except ValueError as exc:
                raise ParseError(str(exc), lineno) from None
            if len(items) != m:
                raise ParseError(f"menu lists {len(items)} items but m={m}", lineno)
            if menus and m != len(menus[0]):
                raise ParseError("all observations must share one menu size", lineno)
            if y not in items:
                raise ParseError(f"chosen item {y} not in menu", lineno)
            rows.append([r, y])
            menus.append(sorted(items))
        size = n or header_n or (max(max(s) for s in menus) if menus else 2)
        m = len(menus[0]) if menus else 2
        arr = np.array(rows, dtype=np.int64).reshape(-1, 2)
        return cls(size, np.array(menus, dtype=np.int64).reshape(-1, m), arr[:, 1], arr[:, 0])

    def save(self, path: str | Path) -> None:
        with _open_text(path, "w") as fh:
            fh.write(self.dumps())

    @classmethod
    def load(cls, path: str | Path, n: int | None = None) -> ChoiceDataset:
        with _open_text(path, "r") as fh:
            return cls.loads(fh.read(), n)


def round_rng(seed: int, r: int) -> np.random.Generator:
    """Independent stream for round ``r`` derived from ``seed``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(r,))))


def _offered_menus(
    num_menus: int, p: float, rng: np.random.Generator
) -> tuple[npt.NDArray[np.int64], npt.NDArray[np.float64]]:
    """Ranks of menus offered in one round (sorted) and their inclusion draws."""
    if p >= _SPARSE_BELOW:
        ranks, draws = [], []
        for start in range(0, num_menus, _DENSE_CHUNK):
            u = rng.random(min(_DENSE_CHUNK, num_menus - start))
            hit = np.flatnonzero(u < p)
            ranks.append(hit + start)
            draws.append(u[hit])
        return np.concatenate(ranks).astype(np.int64), np.concatenate(draws)
    k = int(rng.binomial(num_menus, p))
    chosen = np.zeros(0, dtype=np.int64)
    while chosen.size < k:
        extra = rng.integers(0, num_menus, size=k - chosen.size, dtype=np.int64)
        chosen = np.union1d(chosen, extra)
    # conditioned on inclusion, the draw is uniform on (0, p)
    return chosen, p * rng.random(k)


def _simulate_round(model: ChoiceModel, config: SamplingConfig, r: int):
    rng = round_rng(config.seed, r)
    ranks, draws = _offered_menus(config.num_menus, config.p, rng)
    menus = kernels.unrank_combinations(ranks, config.n, config.m)
    choices = sample_choices(model, menus, rng)
    return menus, choices, draws


def simulate_dataset(model: ChoiceModel, config: SamplingConfig, threads: int = 1) -> ChoiceDataset:
    """Run ``R`` rounds; each menu is offered independently with probability ``p``.

    Output order is (round, lexicographic menu) and does not depend on
    ``threads``.
    """
    if model.n != config.n:
        raise DomainError(f"model has {model.n} items but config has n={config.n}")
    trials = config.R * config.num_menus
    if trials > MAX_TRIALS and not config.allow_large:
        raise DomainError(f"R*C(n,m) = {trials} candidate trials exceeds {MAX_TRIALS}; set allow_large")
    run = lambda r: _simulate_round(model, config, r)  # noqa: E731
    rounds = range(1, config.R + 1)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, rounds))
    else:
        parts = [run(r) for r in rounds]
    sizes = [p[1].size for p in parts]
    return ChoiceDataset(
        config.n,
        np.concatenate([p[0] for p in parts]).reshape(-1, config.m),
        np.concatenate([p[1] for p in parts]),
        np.repeat(np.arange(1, config.R + 1, dtype=np.int64), sizes),
        np.concatenate([p[2] for p in parts]),
    )
