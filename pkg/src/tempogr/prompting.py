"""Text rendering of the user-level temporal context and the item-level transition context."""

from __future__ import annotations

import datetime as _dt
import enum
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from tempogr.corpus import UserSequence, day_index
from tempogr.identifiers import TextualId
from tempogr.transition import DecayParams, TransitionGraph, top_k_neighbors

_EPOCH = _dt.date(1970, 1, 1)
DAYS_PER_MONTH = 30
DAYS_PER_YEAR = 365


class PromptVariant(str, enum.Enum):
    NONE = "none"
    ABSOLUTE = "absolute"
    RELATIVE = "relative"
    TARGET_RELATIVE = "target_relative"
    RELATIVE_ABSOLUTE = "relative_absolute"
    TARGET_RELATIVE_ABSOLUTE = "target_relative_absolute"

    @property
    def shows_dates(self) -> bool:
        return self in (PromptVariant.ABSOLUTE, PromptVariant.RELATIVE_ABSOLUTE, PromptVariant.TARGET_RELATIVE_ABSOLUTE)

    @property
    def shows_gaps(self) -> bool:
        return self in (PromptVariant.RELATIVE, PromptVariant.RELATIVE_ABSOLUTE)

    @property
    def shows_target_intervals(self) -> bool:
        return self in (PromptVariant.TARGET_RELATIVE, PromptVariant.TARGET_RELATIVE_ABSOLUTE)

    @classmethod
    def parse(cls, value: "str | PromptVariant") -> "PromptVariant":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "_").replace("+", "_").replace(" ", "_")
        aliases = {"targetrelative": "target_relative", "relativeabsolute": "relative_absolute",
                   "targetrelativeabsolute": "target_relative_absolute",
                   "tr": "target_relative", "ra": "relative_absolute", "tra": "target_relative_absolute"}
        key = aliases.get(key.replace("_", ""), key)
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown prompt variant {value!r}") from None


def format_date(day: int) -> str:
    if day < 0:
        raise ValueError("day index must be >= 0")
    return (_EPOCH + _dt.timedelta(days=day)).isoformat()


def format_interval(days: int) -> str:
    """'same day', or e.g. '1 years, 1 months, 3 days' with zero parts dropped."""
    if days < 0:
        raise ValueError("interval must be >= 0")
    if days == 0:
        return "same day"
    years, rest = divmod(days, DAYS_PER_YEAR)
    months, rest = divmod(rest, DAYS_PER_MONTH)
    parts = [f"{n} {unit}" for n, unit in ((years, "years"), (months, "months"), (rest, "days")) if n]
    return ", ".join(parts)


def render_user_context(
    ids: Sequence[str],
    days: Sequence[int],
    inference_day: int,
    variant: PromptVariant | str = PromptVariant.TARGET_RELATIVE_ABSOLUTE,
    most_recent_first: bool = True,
) -> str:
    """``ids`` and ``days`` are chronological; the listing order is set by ``most_recent_first``."""
    variant = PromptVariant.parse(variant)
    if not ids:
        raise ValueError("empty history")
    if len(ids) != len(days):
        raise ValueError("ids and days differ in length")
    n = len(ids)
    entries = []
    for pos, (name, day) in enumerate(zip(ids, days)):
        notes = []
        if variant.shows_dates:
            notes.append(format_date(day))
        if variant.shows_gaps and pos < n - 1:
            notes.append(f"after {format_interval(days[pos + 1] - day)}")
        if variant.shows_target_intervals:
            notes.append(f"{format_interval(inference_day - day)} ago")
        entries.append(f"{name} ({', '.join(notes)})" if notes else name)
    if most_recent_first:
        entries.reverse()
    text = f"What would the user purchase after {', '.join(entries)} ?"
    if variant is PromptVariant.TARGET_RELATIVE_ABSOLUTE:
        text = f"The current date is {format_date(inference_day)}. {text}"
    return text


def render_transition_context(
    last_items: Sequence[str], neighbor_sets: Sequence[Sequence[str]]
) -> str:
    """One line per item, in the order given (callers pass most-recent-first)."""
    lines = [
        f"After {item}, users often buy: {' '.join(nbrs)}."
        for item, nbrs in zip(last_items, neighbor_sets, strict=True)
    ]
    return "\n".join(lines)


@dataclass(frozen=True)
class PromptConfig:
    variant: PromptVariant = PromptVariant.TARGET_RELATIVE_ABSOLUTE
    max_seq_len: int = 20
    k: int = 1
    L: int = 2
    most_recent_first: bool = True
    decay: DecayParams = field(default_factory=DecayParams)


@dataclass(frozen=True)
class PromptFeatures:
    """Structured view that the rendered text is a pure function of (given the variant)."""

    user: str
    items: tuple[str, ...]  # chronological, truncated to max_seq_len
    days: tuple[int, ...]
    inference_day: int
    last_items: tuple[str, ...]  # most recent first, at most L
    neighbors: tuple[tuple[tuple[str, float], ...], ...]  # top-k successors per last item

    @property
    def target_intervals(self) -> tuple[int, ...]:
        return tuple(self.inference_day - d for d in self.days)


@dataclass(frozen=True)
class PromptPair:
    c_u: str
    c_v: str
    features: PromptFeatures
    variant: PromptVariant


def prompt_features(
    history: UserSequence,
    inference_day: int,
    graph: TransitionGraph,
    config: PromptConfig,
    ids: Mapping[str, TextualId] | None = None,
) -> PromptFeatures:
    hist = history.tail(config.max_seq_len)
    days = tuple(day_index(t) for t in hist.timestamps)
    if days and inference_day < days[-1]:
        raise ValueError(f"user {history.user!r}: inference day precedes history")
    rendered = {i: t.rendered for i, t in ids.items()} if ids is not None else None
    last = tuple(reversed(hist.items[-config.L:]))
    neighbors = tuple(tuple(top_k_neighbors(graph, i, config.k, config.decay, rendered)) for i in last)
    return PromptFeatures(history.user, hist.items, days, inference_day, last, neighbors)


def render_prompt(
    features: PromptFeatures,
    ids: Mapping[str, TextualId],
    variant: PromptVariant | str,
    most_recent_first: bool = True,
) -> PromptPair:
    variant = PromptVariant.parse(variant)
    name = lambda i: ids[i].rendered  # noqa: E731
    c_u = render_user_context(
        [name(i) for i in features.items], features.days, features.inference_day, variant, most_recent_first
    )
    c_v = render_transition_context(
        [name(i) for i in features.last_items],
        [[name(j) for j, _ in nbrs] for nbrs in features.neighbors],
    )
    return PromptPair(c_u, c_v, features, variant)


def build_prompt(
    history: UserSequence,
    inference_day: int,
    ids: Mapping[str, TextualId],
    graph: TransitionGraph,
    config: PromptConfig,
) -> PromptPair:
    feats = prompt_features(history, inference_day, graph, config, ids)
    return render_prompt(feats, ids, config.variant, config.most_recent_first)
