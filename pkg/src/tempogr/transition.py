"""Global item-transition graph with time-decayed transition probabilities."""

from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from tempogr.corpus import UserSequence, day_index
from tempogr.errors import DataError, NoOutgoingTransitions


@dataclass(frozen=True)
class DecayParams:
    """Exponential decay with time constant ``tau`` (days), floored at ``c``."""

    tau: float = 128.0
    c: float = 0.9

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError(f"tau must be > 0, got {self.tau}")
        if not 0.0 <= self.c <= 1.0:
            raise ValueError(f"c must be in [0, 1], got {self.c}")


def time_weight(delta_days, params: DecayParams):
    """max(exp(-|dt| / tau), c). Accepts scalars or numpy arrays."""
    if np.ndim(delta_days):
        return np.maximum(np.exp(-np.abs(delta_days) / params.tau), params.c)
    return max(math.exp(-abs(delta_days) / params.tau), params.c)


class TransitionGraph:
    """Multiset of day intervals per ordered item pair (i, j).

    Weighted row sums are cached per ``DecayParams``; the intervals themselves are
    never modified after construction.
    """

    def __init__(self, intervals: Mapping[str, Mapping[str, list[int]]] | None = None, exclude_self: bool = False):
        self.exclude_self = exclude_self
        self._out: dict[str, dict[str, tuple[int, ...]]] = {
            i: {j: tuple(v) for j, v in nbrs.items() if v} for i, nbrs in (intervals or {}).items()
        }
        self._out = {i: nbrs for i, nbrs in self._out.items() if nbrs}
        self._cache: dict[DecayParams, dict[str, tuple[dict[str, float], float]]] = {}

    def sources(self) -> list[str]:
        return sorted(self._out)

    def intervals(self, i: str, j: str) -> tuple[int, ...]:
        return self._out.get(i, {}).get(j, ())

    def out_degree(self, i: str) -> int:
        return len(self._out.get(i, ()))

    def n_occurrences(self) -> int:
        return sum(len(v) for nbrs in self._out.values() for v in nbrs.values())

    def items(self) -> set[str]:
        found = set(self._out)
        for nbrs in self._out.values():
            found.update(nbrs)
        return found

    def _weighted_row(self, i: str, params: DecayParams) -> tuple[dict[str, float], float]:
        rows = self._cache.get(params)
        if rows is None:
            rows = self._cache[params] = {}
        row = rows.get(i)
        if row is None:
            nbrs = self._out.get(i)
            if not nbrs:
                raise NoOutgoingTransitions(i)
            sums = {j: float(np.sum(time_weight(np.asarray(v, dtype=float), params))) for j, v in nbrs.items()}
            row = rows[i] = (sums, math.fsum(sums.values()))
        return row

    def transition_row(self, i: str, params: DecayParams) -> dict[str, float]:
        """p(i -> j) for every j with at least one observed pair."""
        sums, total = self._weighted_row(i, params)
        return {j: s / total for j, s in sums.items()}

    def to_json(self) -> dict:
        return {
            "exclude_self": self.exclude_self,
            "adjacency": [
                {"i": i, "out": [{"j": j, "intervals": list(v)} for j, v in sorted(self._out[i].items())]}
                for i in self.sources()
            ],
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "TransitionGraph":
        try:
            intervals = {
                rec["i"]: {e["j"]: [int(x) for x in e["intervals"]] for e in rec["out"]}
                for rec in obj["adjacency"]
            }
        except (KeyError, TypeError) as exc:
            raise DataError(f"malformed graph record: {exc}") from None
        return cls(intervals, exclude_self=bool(obj.get("exclude_self", False)))


def build_graph(train_sequences: Iterable[UserSequence], exclude_self: bool = False) -> TransitionGraph:
    """Every within-user pair of positions t < t' adds one interval occurrence to (i_t, i_t')."""
    intervals: dict[str, dict[str, list[int]]] = defaultdict(lambda: defaultdict(list))
    for seq in train_sequences:
        days = [day_index(ts) for ts in seq.timestamps]
        n = len(seq.items)
        for a in range(n):
            src, d0 = seq.items[a], days[a]
            row = intervals[src]
            for b in range(a + 1, n):
                dst = seq.items[b]
                if exclude_self and dst == src:
                    continue
                row[dst].append(days[b] - d0)
    return TransitionGraph(intervals, exclude_self=exclude_self)


def transition_prob(graph: TransitionGraph, i: str, j: str, params: DecayParams) -> float:
    sums, total = graph._weighted_row(i, params)
    return sums.get(j, 0.0) / total


def top_k_neighbors(
    graph: TransitionGraph,
    i: str,
    k: int,
    params: DecayParams,
    rendered: Mapping[str, str] | None = None,
) -> list[tuple[str, float]]:
    """The ``k`` most probable successors of ``i``; ties ordered by rendered ID.

    ``rendered`` maps item -> rendered ID for the tiebreak; raw item ids are used
    when it is omitted.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    try:
        row = graph.transition_row(i, params)
    except NoOutgoingTransitions:
        return []
    name = rendered.__getitem__ if rendered is not None else (lambda x: x)
    ranked = sorted(row.items(), key=lambda kv: (-kv[1], name(kv[0])))
    return ranked[:k]


def save_graph(path, graph: TransitionGraph, header: Mapping | None = None) -> None:
    obj = {"header": dict(header or {}), **graph.to_json()}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, sort_keys=True)


def load_graph(path) -> tuple[TransitionGraph, dict]:
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    return TransitionGraph.from_json(obj), obj.get("header", {})
