"""Ranking corpora in PrefLib-style text form.

A file has ``#`` header lines, of which ``# NUMBER ALTERNATIVES: n`` is
required and ``# ALTERNATIVE NAME i: label`` is optional, followed by one
line per distinct ballot::

    3: 1,2,{3,4},5

meaning three voters ranked 1 above 2 above the tie {3,4} above 5. Items
missing from a ballot are treated as one tie at the bottom.
"""

from __future__ import annotations

import math
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np
import numpy.typing as npt

from . import kernels
from .choice_models import TabularChoiceModel, _open_text
from .errors import DomainError, IntransitiveError, ParseError, ValidationError
from .sampling import enumerate_menus

_COUNT_KEY = "NUMBER ALTERNATIVES"
_NAME_RE = re.compile(r"ALTERNATIVE NAME (\d+)\s*:\s*(.*)$")
MAX_MENUS = 10**7


@dataclass(frozen=True)
class RankingRecord:
    """One ballot: ordered tiers of tied items and how many voters cast it."""

    tiers: tuple[frozenset[int], ...]
    multiplicity: int = 1

    def __post_init__(self) -> None:
        tiers = tuple(frozenset(t) for t in self.tiers)
        if not tiers or any(not t for t in tiers):
            raise ValidationError("a ranking needs at least one nonempty tier")
        seen: set[int] = set()
        for tier in tiers:
            if seen & tier:
                raise ValidationError(f"item {min(seen & tier)} appears twice in one ranking")
            seen |= tier
        if self.multiplicity < 1:
            raise ValidationError(f"multiplicity {self.multiplicity} must be at least 1")
        object.__setattr__(self, "tiers", tiers)

    @property
    def items(self) -> frozenset[int]:
        return frozenset().union(*self.tiers)

    def tier_index(self, n: int) -> npt.NDArray[np.int64]:
        """Tier of each item ``1..n``; unranked items share one extra bottom tier."""
        out = np.full(n, len(self.tiers), dtype=np.int64)
        for k, tier in enumerate(self.tiers):
            out[np.fromiter(tier, dtype=np.int64) - 1] = k
        return out

    def format(self) -> str:
        parts = [str(next(iter(t))) if len(t) == 1 else "{" + ",".join(map(str, sorted(t))) + "}" for t in self.tiers]
        return f"{self.multiplicity}: {','.join(parts)}"


@dataclass(frozen=True)
class RankingDataset:
    """Ballots over items ``1..n``.

    ``header`` keeps the original comment lines so a parsed file serializes
    back unchanged.
    """

    n: int
    records: tuple[RankingRecord, ...]
    names: dict[int, str] = field(default_factory=dict)
    header: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "records", tuple(self.records))
        for rec in self.records:
            bad = [i for i in rec.items if not 1 <= i <= self.n]
            if bad:
                raise ValidationError(f"item {bad[0]} outside [1, {self.n}]")

    @property
    def total_rankings(self) -> int:
        return sum(r.multiplicity for r in self.records)

    def tier_matrix(self) -> tuple[npt.NDArray[np.int64], npt.NDArray[np.int64]]:
        tiers = np.array([r.tier_index(self.n) for r in self.records], dtype=np.int64).reshape(-1, self.n)
        mult = np.array([r.multiplicity for r in self.records], dtype=np.int64)
        return tiers, mult

    def dumps(self) -> str:
        header = list(self.header)
        if not header:
            header = [f"# {_COUNT_KEY}: {self.n}"]
            header += [f"# ALTERNATIVE NAME {i}: {self.names[i]}" for i in sorted(self.names)]
        return "\n".join(header + [r.format() for r in self.records]) + "\n"

    def save(self, path: str | Path) -> None:
        with _open_text(path, "w") as fh:
            fh.write(self.dumps())


def _parse_int(token: str, lineno: int, what: str) -> int:
    token = token.strip()
    if not re.fullmatch(r"\d+", token):
        raise ParseError(f"malformed {what} {token!r}", lineno)
    return int(token)


def _parse_tiers(body: str, n: int, lineno: int) -> list[frozenset[int]]:
    tiers: list[frozenset[int]] = []
    seen: set[int] = set()
    pos, body = 0, body.strip()
    while pos < len(body):
        if body[pos] == "{":
            end = body.find("}", pos)
            if end < 0:
                raise ParseError("unclosed '{'", lineno)
            tokens = body[pos + 1 : end].split(",")
            pos = end + 1
        else:
            end = body.find(",", pos)
            end = len(body) if end < 0 else end
            tokens = [body[pos:end]]
            pos = end
        items = [_parse_int(t, lineno, "item id") for t in tokens]
        for i in items:
            if not 1 <= i <= n:
                raise ParseError(f"unknown item id {i}", lineno)
            if i in seen:
                raise ParseError(f"duplicate item {i} in ranking", lineno)
            seen.add(i)
        tiers.append(frozenset(items))
        if pos < len(body):
            if body[pos] != ",":
                raise ParseError(f"expected ',' at column {pos + 1}", lineno)
            pos += 1
            if pos == len(body):
                raise ParseError("trailing ','", lineno)
    if not tiers:
        raise ParseError("empty ranking", lineno)
    return tiers


def parse_rankings(text: str) -> RankingDataset:
    """Parse a corpus from its text. Errors carry the offending line number."""
    n = None
    names: dict[int, str] = {}
    header: list[str] = []
    records: list[RankingRecord] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            if records:
                raise ParseError("header line after data", lineno)
            header.append(raw.rstrip())
            body = line[1:].strip()
            if body.startswith(_COUNT_KEY):
                n = _parse_int(body.split(":", 1)[-1], lineno, "item count")
            elif match := _NAME_RE.match(body):
                names[int(match.group(1))] = match.group(2).strip()
            continue
        if n is None:
            raise ParseError(f"missing '# {_COUNT_KEY}: n' header before data", lineno)
        if ":" not in line:
            raise ParseError("expected 'count: ranking'", lineno)
        count_text, body = line.split(":", 1)
        count = _parse_int(count_text, lineno, "count")
        if count < 1:
            raise ParseError("count must be at least 1", lineno)
        records.append(RankingRecord(tuple(_parse_tiers(body, n, lineno)), count))
    if n is None:
        raise ParseError(f"missing '# {_COUNT_KEY}: n' header", 0)
    return RankingDataset(n, tuple(records), names, tuple(header))


def load_rankings(path: str | Path) -> RankingDataset:
    with _open_text(path, "r") as fh:
        return parse_rankings(fh.read())


def _win_mass(rankings: RankingDataset, m: int, scale: int, threads: int) -> npt.NDArray[np.int64]:
    tiers, mult = rankings.tier_matrix()
    if threads <= 1 or len(mult) < 2 * threads:
        return kernels.menu_win_mass(tiers, mult, m, scale)
    # integer partial sums merge exactly in any order
    bounds = np.linspace(0, len(mult), threads + 1).astype(int)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = pool.map(lambda k: kernels.menu_win_mass(tiers[bounds[k] : bounds[k + 1]], mult[bounds[k] : bounds[k + 1]], m, scale), range(threads))
        return sum(parts)


def menu_win_fractions(rankings: RankingDataset, m: int, threads: int = 1) -> dict[tuple[int, ...], tuple[Fraction, ...]]:
    """Exact choice probabilities per menu as fractions.

    An item wins a menu outright when it is ranked strictly above every
    other member; a tie of ``l`` members at the top gives each ``1/l``.
    """
    scale, mass, total = _checked_mass(rankings, m, threads)
    den = scale * total
    return {menu: tuple(Fraction(int(x), den) for x in row) for menu, row in zip(enumerate_menus(rankings.n, m), mass)}


def _checked_mass(rankings: RankingDataset, m: int, threads: int) -> tuple[int, npt.NDArray[np.int64], int]:
    n = rankings.n
    if not 2 <= m <= n:
        raise DomainError(f"menu size m={m} must satisfy 2 <= m <= n={n}")
    if math.comb(n, m) > MAX_MENUS:
        raise DomainError(f"C({n},{m}) menus exceeds {MAX_MENUS}")
    total = rankings.total_rankings
    if total == 0:
        raise DomainError("corpus has no rankings")
    scale = math.lcm(*range(1, m + 1))
    if scale * total >= 2**62:
        raise DomainError("corpus too large for exact integer accumulation")
    mass = _win_mass(rankings, m, scale, threads)
    empty = np.flatnonzero(mass.sum(axis=1) == 0)
    if empty.size:
        menu = tuple(kernels.unrank_combinations(empty[:1], n, m)[0].tolist())
        raise DomainError(f"menu {menu} received no win mass")
    return scale, mass, total


def empirical_choice_probs(rankings: RankingDataset, m: int, threads: int = 1) -> TabularChoiceModel:
    """Tabular model of fractional menu wins over every size-``m`` menu.

    Win mass is accumulated as integers scaled by ``lcm(1..m)`` and divided
    by the total once, so the result does not depend on record order.
    """
    scale, mass, total = _checked_mass(rankings, m, threads)
    probs = mass.astype(np.float64) / float(scale * total)
    table = {menu: tuple(row) for menu, row in zip(enumerate_menus(rankings.n, m), probs.tolist())}
    return TabularChoiceModel(rankings.n, table)


@dataclass(frozen=True)
class GroundTruth:
    """Majority ordering (best first) and the pairwise matrix certifying it.

    ``pairwise[i, j]`` is the share of voters putting item ``i+1`` above
    ``j+1``, with ties split evenly.
    """

    ordering: tuple[int, ...]
    pairwise: npt.NDArray[np.float64]

    def top_k(self, K: int) -> frozenset[int]:
        return frozenset(self.ordering[:K])

    def dumps(self) -> str:
        return "rank,item\n" + "".join(f"{r},{i}\n" for r, i in enumerate(self.ordering, start=1))

    def save(self, path: str | Path) -> None:
        with _open_text(path, "w") as fh:
            fh.write(self.dumps())


def load_ordering(path: str | Path) -> tuple[int, ...]:
    """Read a ``rank,item`` file back into an ordering."""
    with _open_text(path, "r") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or lines[0] != "rank,item":
        raise ParseError("expected header 'rank,item'", 1)
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        try:
            r, i = (int(x) for x in line.split(","))
        except ValueError:
            raise ParseError(f"malformed row {line!r}", lineno) from None
        rows.append((r, i))
    return tuple(i for _, i in sorted(rows))


def pairwise_matrix(rankings: RankingDataset) -> npt.NDArray[np.float64]:
    n = rankings.n
    P = np.full((n, n), 0.5)
    if n >= 2:
        model = empirical_choice_probs(rankings, 2)
        for (i, j), (pi, pj) in model.probs.items():
            P[i - 1, j - 1], P[j - 1, i - 1] = pi, pj
    return P


def _cycle(beats: npt.NDArray[np.bool_], alive: npt.NDArray[np.bool_]) -> tuple[int, ...]:
    # every live node has a live predecessor, so walking backwards must repeat
    path: list[int] = [int(np.flatnonzero(alive)[0])]
    while True:
        v = int(np.flatnonzero(beats[:, path[-1]] & alive)[0])
        if v in path:
            loop = path[path.index(v) :]
            return tuple(x + 1 for x in reversed(loop))
        path.append(v)


def ground_truth_ordering(rankings: RankingDataset) -> GroundTruth:
    """Order items by pairwise majority.

    Raises :class:`IntransitiveError` naming three items when the majority
    relation has a cycle. Items with no majority between them keep label
    order.
    """
    P = pairwise_matrix(rankings)
    n = rankings.n
    beats = P > 0.5
    bi = beats.astype(np.int64)
    # i beats j, j beats k, k beats i
    closes = (bi @ bi) * bi.T
    if closes.any():
        i = int(np.flatnonzero(closes.any(axis=1))[0])
        k = int(np.flatnonzero(closes[i])[0])
        j = int(np.flatnonzero(beats[i] & beats[:, k])[0])
        raise IntransitiveError((i + 1, j + 1, k + 1))
    indegree = beats.sum(axis=0)
    placed = np.zeros(n, dtype=bool)
    order: list[int] = []
    for _ in range(n):
        ready = np.flatnonzero((indegree == 0) & ~placed)
        if ready.size == 0:
            raise IntransitiveError(_cycle(beats, ~placed)[:3])
        v = int(ready[0])
        placed[v] = True
        order.append(v + 1)
        indegree = indegree - beats[v]
    return GroundTruth(tuple(order), P)
