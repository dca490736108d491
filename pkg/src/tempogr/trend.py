"""Windowed item popularity (trend) scores and their aggregation with beam scores."""

from __future__ import annotations

import json
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from tempogr.corpus import Interaction


@dataclass(frozen=True)
class TrendTable:
    """Interaction counts per item over days [t_rec - N - 1, t_rec - 1]."""

    t_rec: int
    N: int
    counts: Mapping[str, int] = field(default_factory=dict)

    @property
    def r_max(self) -> int:
        return max(self.counts.values(), default=0)

    @property
    def window(self) -> tuple[int, int]:
        return self.t_rec - self.N - 1, self.t_rec - 1

    def to_json(self) -> dict:
        return {"t_rec": self.t_rec, "N": self.N, "counts": dict(sorted(self.counts.items()))}

    @classmethod
    def from_json(cls, obj: Mapping) -> "TrendTable":
        return cls(int(obj["t_rec"]), int(obj["N"]), {k: int(v) for k, v in obj["counts"].items()})


def build_trend_table(interactions: Iterable[Interaction], t_rec: int, N: int) -> TrendTable:
    """The recommendation day itself is excluded from the window."""
    if N < 1:
        raise ValueError("window N must be >= 1")
    lo, hi = t_rec - N - 1, t_rec - 1
    counts = Counter(e.item for e in interactions if lo <= e.day <= hi)
    return TrendTable(t_rec, N, dict(counts))


class DailyCounts:
    """Per-day item counts, built once; serves trend tables for any (t_rec, N)."""

    def __init__(self, interactions: Iterable[Interaction]):
        self._by_day: dict[int, Counter] = defaultdict(Counter)
        for e in interactions:
            self._by_day[e.day][e.item] += 1
        self._tables: dict[tuple[int, int], TrendTable] = {}

    def table(self, t_rec: int, N: int) -> TrendTable:
        key = (t_rec, N)
        cached = self._tables.get(key)
        if cached is None:
            if N < 1:
                raise ValueError("window N must be >= 1")
            counts: Counter = Counter()
            for day in range(t_rec - N - 1, t_rec):
                counts.update(self._by_day.get(day, ()))
            cached = self._tables[key] = TrendTable(t_rec, N, dict(counts))
        return cached


def trend_score(table: TrendTable, item: str) -> float:
    """ln(r_i / r_max + 1); zero for every item when the window is empty."""
    r_max = table.r_max
    if r_max == 0:
        return 0.0
    return math.log(table.counts.get(item, 0) / r_max + 1.0)


@dataclass(frozen=True)
class RankedEntry:
    item: str
    beam_score: float
    trend_score: float
    final_score: float
    in_catalog: bool = True


def aggregate(
    ranked: Sequence[tuple[str, float]],
    table: TrendTable,
    lam: float,
    names: Mapping[str, str] | None = None,
    catalog: Iterable[str] | None = None,
) -> list[RankedEntry]:
    """final = beam + lam * trend, re-sorted descending.

    ``names`` maps item -> rendered ID; equal finals are ordered by it, or keep
    their input order when ``names`` is omitted. When ``catalog`` is given,
    items outside it are scored with zero trend and flagged.
    """
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    known = set(catalog) if catalog is not None else None
    entries = []
    for item, beam in ranked:
        inside = known is None or item in known
        trend = trend_score(table, item) if inside else 0.0
        entries.append(RankedEntry(item, beam, trend, beam + lam * trend, inside))
    if names is None:
        entries.sort(key=lambda e: -e.final_score)
    else:
        entries.sort(key=lambda e: (-e.final_score, names.get(e.item, e.item)))
    return entries


def rerank_external(
    candidates: Sequence[tuple[str, float]],
    table: TrendTable,
    lam: float,
    catalog: Iterable[str] | None = None,
    names: Mapping[str, str] | None = None,
) -> list[RankedEntry]:
    """Trend reranking of another recommender's scored candidates."""
    return aggregate(candidates, table, lam, names=names, catalog=catalog)


def save_trend_table(path, table: TrendTable) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(table.to_json(), fh, sort_keys=True)


def load_trend_table(path) -> TrendTable:
    with open(path, encoding="utf-8") as fh:
        return TrendTable.from_json(json.load(fh))
