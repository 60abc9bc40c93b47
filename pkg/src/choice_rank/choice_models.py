"""Choice models: IID random-utility models and explicit probability tables.

Items are labelled ``1..n`` everywhere in the public API. Score vectors are
numpy arrays in which position ``i - 1`` belongs to item ``i``.
"""

from __future__ import annotations

import enum
import gzip
import io
import math
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from pathlib import Path
from typing import TextIO, Union

import numpy as np
import numpy.typing as npt
from scipy.special import ndtri

from .errors import DomainError, ParseError, ValidationError

Menu = tuple[int, ...]
"""A menu: strictly increasing tuple of 1-based item labels, length >= 2."""

ChoiceModel = Union["ParametricChoiceModel", "TabularChoiceModel"]

_HALF_ULP = 2.0**-54


def make_menu(items: Iterable[int], n: int | None = None) -> Menu:
    """Canonicalize ``items`` into a sorted menu, validating it on the way."""
    menu = tuple(sorted(int(i) for i in items))
    if len(menu) < 2:
        raise DomainError(f"menu {menu} must contain at least two items")
    if len(set(menu)) != len(menu):
        raise DomainError(f"menu {menu} contains duplicate items")
    if menu[0] < 1 or (n is not None and menu[-1] > n):
        raise DomainError(f"menu {menu} has items outside [1, {n}]")
    return menu


def open_uniform(rng: np.random.Generator, size=None) -> npt.NDArray[np.float64]:
    """Uniform draws on the open interval (0, 1)."""
    return rng.random(size) + _HALF_ULP


class NoiseFamily(enum.Enum):
    """Distribution of the i.i.d. utility noise."""

    GUMBEL = "gumbel"
    NORMAL = "normal"
    EXPONENTIAL = "exponential"

    def sample(self, rng: np.random.Generator, size) -> npt.NDArray[np.float64]:
        u = open_uniform(rng, size)
        if self is NoiseFamily.GUMBEL:
            return -np.log(-np.log(u))
        if self is NoiseFamily.EXPONENTIAL:
            return -np.log(u)
        return ndtri(u)


@dataclass(frozen=True)
class PartworthVector:
    """Deterministic item utilities ``U_1..U_n``."""

    values: npt.NDArray[np.float64]

    def __post_init__(self) -> None:
        arr = np.array(self.values, dtype=np.float64)
        if arr.ndim != 1 or arr.size < 2:
            raise ValidationError("need at least two partworths")
        if not np.isfinite(arr).all():
            raise ValidationError("partworths must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def n(self) -> int:
        return int(self.values.size)

    @property
    def non_degenerate(self) -> bool:
        s = np.sort(self.values)
        return bool(np.all(np.diff(s) != 0))

    @property
    def u_max(self) -> float:
        return float(self.values.max())

    @property
    def u_min(self) -> float:
        return float(self.values.min())


@dataclass(frozen=True)
class ParametricChoiceModel:
    """IID-RUM: item ``i`` has perceived utility ``U_i + eps_i``; the argmax is chosen."""

    partworths: PartworthVector
    noise: NoiseFamily = NoiseFamily.GUMBEL

    @property
    def n(self) -> int:
        return self.partworths.n

    @property
    def weights(self) -> npt.NDArray[np.float64]:
        """MNL weights ``exp(U)``."""
        return np.exp(self.partworths.values)

    @property
    def is_mnl(self) -> bool:
        return self.noise is NoiseFamily.GUMBEL

    def choice_probs(self, menus: npt.ArrayLike) -> npt.NDArray[np.float64]:
        """Closed-form probabilities for each member of each menu (MNL only)."""
        if not self.is_mnl:
            raise DomainError(f"{self.noise.value} noise has no closed-form choice probabilities")
        menus = np.atleast_2d(np.asarray(menus, dtype=np.int64))
        u = self.partworths.values[menus - 1]
        u = u - u.max(axis=1, keepdims=True)
        e = np.exp(u)
        return e / e.sum(axis=1, keepdims=True)


def mnl_model(weights: npt.ArrayLike) -> ParametricChoiceModel:
    """MNL model with the given positive weights."""
    w = np.asarray(weights, dtype=np.float64)
    if np.any(w <= 0) or not np.isfinite(w).all():
        raise DomainError("MNL weights must be finite and positive")
    return ParametricChoiceModel(PartworthVector(np.log(w)), NoiseFamily.GUMBEL)


@dataclass(frozen=True)
class TabularChoiceModel:
    """Explicit choice probabilities for a collection of menus.

    ``probs`` maps each canonical menu to a vector aligned with the menu's
    items. Lookups canonicalize their menu argument first.

    With ``normalized=False`` a menu's entries need not sum to one. This
    holds directional pairwise tables whose ``(i, j)`` and ``(j, i)``
    entries were specified independently; such tables can be scored but
    not sampled from.
    """

    n: int
    probs: Mapping[Menu, npt.NDArray[np.float64]] = field(repr=False)
    normalized: bool = True

    def __post_init__(self) -> None:
        if self.n < 2:
            raise DomainError("tabular model needs n >= 2")
        clean: dict[Menu, npt.NDArray[np.float64]] = {}
        for raw_menu, raw_p in self.probs.items():
            try:
                menu = make_menu(raw_menu, self.n)
            except DomainError as exc:
                raise ValidationError(str(exc)) from None
            order = np.argsort(np.asarray(raw_menu))
            p = np.asarray(raw_p, dtype=np.float64)[order]
            if p.shape != (len(menu),):
                raise ValidationError(f"menu {menu}: expected {len(menu)} probabilities, got {p.size}")
            if np.any(p < 0) or not np.isfinite(p).all():
                raise ValidationError(f"menu {menu}: probabilities must be finite and nonnegative")
            if self.normalized and abs(p.sum() - 1.0) > 1e-12:
                raise ValidationError(f"menu {menu}: probabilities sum to {p.sum()!r}, not 1")
            if menu in clean:
                raise ValidationError(f"menu {menu} listed twice")
            p.setflags(write=False)
            clean[menu] = p
        object.__setattr__(self, "probs", dict(sorted(clean.items())))

    def __contains__(self, menu: Iterable[int]) -> bool:
        return tuple(sorted(menu)) in self.probs

    def menu_probs(self, menu: Iterable[int]) -> npt.NDArray[np.float64]:
        key = tuple(sorted(menu))
        try:
            return self.probs[key]
        except KeyError:
            raise DomainError(f"menu {key} is not in the tabular model") from None

    def choice_prob(self, item: int, menu: Iterable[int]) -> float:
        key = tuple(sorted(menu))
        if item not in key:
            raise DomainError(f"item {item} is not in menu {key}")
        return float(self.menu_probs(key)[key.index(item)])

    @property
    def menu_size(self) -> int | None:
        """The common menu size, or ``None`` when sizes are mixed."""
        sizes = {len(s) for s in self.probs}
        return sizes.pop() if len(sizes) == 1 else None

    def choice_probs(self, menus: npt.ArrayLike) -> npt.NDArray[np.float64]:
        menus = np.atleast_2d(np.asarray(menus, dtype=np.int64))
        return np.array([self.menu_probs(tuple(row)) for row in menus.tolist()])

    def to_arrays(self) -> tuple[npt.NDArray[np.int64], npt.NDArray[np.float64]]:
        """Menus and probabilities as ``(M, m)`` arrays; requires a common menu size."""
        if self.menu_size is None:
            raise DomainError("tabular model mixes menu sizes")
        menus = np.array(list(self.probs), dtype=np.int64)
        probs = np.array(list(self.probs.values()), dtype=np.float64)
        return menus, probs

    def dumps(self) -> str:
        lines = [f"# n={self.n}"]
        if not self.normalized:
            lines.append("# normalized=false")
        for menu, p in self.probs.items():
            items = ",".join(map(str, menu))
            vals = ",".join(format(float(x), ".17g") for x in p)
            lines.append(f"{len(menu)};{items};{vals}")
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str, n: int | None = None) -> TabularChoiceModel:
        probs: dict[Menu, list[float]] = {}
        header_n = None
        normalized = True
        max_item = 0
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if body.startswith("n="):
                    header_n = int(body[2:])
                elif body.replace(" ", "") == "normalized=false":
                    normalized = False
                continue
            parts = line.split(";")
            if len(parts) != 3:
                raise ParseError("expected 'm;i1,...,im;p1,...,pm'", lineno)
            try:
                m = int(parts[0])
                items = [int(x) for x in parts[1].split(",")]
                vals = [float(x) for x in parts[2].split(",")]
            except ValueError as exc:
                raise ParseError(str(exc), lineno) from None
            if len(items) != m or len(vals) != m:
                raise ParseError(f"menu size {m} disagrees with listed items/probabilities", lineno)
            probs[tuple(items)] = vals
            max_item = max(max_item, max(items))
        size = n or header_n or max_item
        return cls(size, probs, normalized)

    def save(self, path: str | Path) -> None:
        with _open_text(path, "w") as fh:
            fh.write(self.dumps())

    @classmethod
    def load(cls, path: str | Path, n: int | None = None) -> TabularChoiceModel:
        with _open_text(path, "r") as fh:
            return cls.loads(fh.read(), n)


def _open_text(path: str | Path, mode: str) -> TextIO:
    path = Path(path)
    if path.suffix == ".gz":
        return io.TextIOWrapper(gzip.open(path, mode + "b"), encoding="utf-8", newline="\n")
    return open(path, mode, encoding="utf-8", newline="\n")


def mnl_choice_prob(weights: npt.ArrayLike, menu: Iterable[int], item: int) -> float:
    """Probability ``w_item / sum_{k in menu} w_k``."""
    w = np.asarray(weights, dtype=np.float64)
    menu = make_menu(menu, w.size)
    if item not in menu:
        raise DomainError(f"item {item} is not in menu {menu}")
    if np.any(w[np.array(menu) - 1] <= 0):
        raise DomainError("weights must be positive")
    return float(w[item - 1] / w[np.array(menu) - 1].sum())


def sample_choice(model: ChoiceModel, menu: Iterable[int], rng: np.random.Generator) -> int:
    """Draw one choice from ``menu``; ties in perceived utility go to the lowest label."""
    menu = make_menu(menu, model.n)
    return int(sample_choices(model, np.array([menu], dtype=np.int64), rng)[0])


def sample_choices(
    model: ChoiceModel, menus: npt.NDArray[np.int64], rng: np.random.Generator
) -> npt.NDArray[np.int64]:
    """Vectorized :func:`sample_choice` over the rows of ``menus``."""
    menus = np.asarray(menus, dtype=np.int64)
    if menus.shape[0] == 0:
        return np.zeros(0, dtype=np.int64)
    if isinstance(model, ParametricChoiceModel):
        util = model.partworths.values[menus - 1] + model.noise.sample(rng, menus.shape)
        pick = np.argmax(util, axis=1)
    else:
        if not model.normalized:
            raise DomainError("cannot sample from a tabular model whose menus do not sum to one")
        probs = model.choice_probs(menus)
        cdf = np.cumsum(probs, axis=1)
        u = rng.random(menus.shape[0])
        pick = np.minimum((cdf <= u[:, None]).sum(axis=1), menus.shape[1] - 1)
    return menus[np.arange(menus.shape[0]), pick]


def mc_choice_prob(
    model: ChoiceModel,
    menu: Iterable[int],
    item: int,
    num_samples: int,
    rng: np.random.Generator,
) -> tuple[float, float]:
    """Monte-Carlo estimate of ``p(item | menu)`` and its standard error."""
    if num_samples < 1:
        raise DomainError("num_samples must be at least 1")
    menu = make_menu(menu, model.n)
    if item not in menu:
        raise DomainError(f"item {item} is not in menu {menu}")
    menus = np.broadcast_to(np.array(menu, dtype=np.int64), (num_samples, len(menu)))
    hits = np.count_nonzero(sample_choices(model, menus, rng) == item)
    p_hat = hits / num_samples
    return p_hat, math.sqrt(p_hat * (1.0 - p_hat) / num_samples)


def tabular_from_matrix(P: npt.ArrayLike, strict: bool = True, upper: bool = False) -> TabularChoiceModel:
    """Pairwise model where ``P[i, j]`` is the probability that ``j`` is chosen from ``{i, j}``.

    With ``strict=False`` complementary entries are not required to sum to
    one: the menu ``{i, j}`` stores ``(P[j, i], P[i, j])`` verbatim and the
    result is an unnormalized table. With ``upper=True`` only entries above
    the diagonal are read and each menu gets ``(1 - P[i, j], P[i, j])``.
    """
    P = np.asarray(P, dtype=np.float64)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ValidationError("pairwise matrix must be square")
    n = P.shape[0]
    if np.any((P < 0) | (P > 1)) or not np.isfinite(P).all():
        raise ValidationError("pairwise matrix entries must lie in [0, 1]")
    probs = {}
    for i in range(n):
        if abs(P[i, i] - 0.5) > 1e-9:
            raise ValidationError(f"diagonal entry P[{i + 1},{i + 1}] = {P[i, i]} must be 0.5")
        for j in range(i + 1, n):
            if upper:
                probs[(i + 1, j + 1)] = (1.0 - P[i, j], P[i, j])
                continue
            if strict and abs(P[i, j] + P[j, i] - 1.0) > 1e-9:
                raise ValidationError(
                    f"P[{i + 1},{j + 1}] + P[{j + 1},{i + 1}] = {P[i, j] + P[j, i]} must be 1"
                )
            probs[(i + 1, j + 1)] = (1.0 - P[i, j], P[i, j]) if strict else (P[j, i], P[i, j])
    return TabularChoiceModel(n, probs, normalized=strict or upper)


def hard_instance_mnl(
    n: int, K: int, v: float, delta: float, topset: Iterable[int]
) -> npt.NDArray[np.float64]:
    """Weights ``v + delta`` on ``topset`` and ``v`` elsewhere."""
    top = set(int(i) for i in topset)
    if not 1 <= K < n:
        raise DomainError(f"K={K} must satisfy 1 <= K < n={n}")
    if len(top) != K or min(top) < 1 or max(top) > n:
        raise DomainError(f"topset must hold exactly K={K} items in [1, {n}]")
    if v <= 0 or delta <= 0:
        raise DomainError("need v > 0 and delta > 0")
    w = np.full(n, float(v))
    w[np.array(sorted(top)) - 1] += delta
    return w


def exact_choice_probs(model: ChoiceModel, menus: npt.ArrayLike) -> npt.NDArray[np.float64]:
    """Exact probabilities for each member of each menu (MNL or tabular)."""
    return model.choice_probs(menus)
