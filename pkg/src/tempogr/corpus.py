"""Interaction ingestion, k-core filtering, chronological sequences and leave-one-out splits."""

from __future__ import annotations

import json
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from tempogr.errors import DataError

SECONDS_PER_DAY = 86400

SHORT, MIDDLE, LONG = "Short", "Middle", "Long"
GROUPS = (SHORT, MIDDLE, LONG)


def day_index(timestamp: int) -> int:
    return timestamp // SECONDS_PER_DAY


@dataclass(frozen=True)
class Interaction:
    user: str
    item: str
    timestamp: int

    def __post_init__(self):
        if not self.user or not self.item:
            raise DataError("interaction needs non-empty user and item")
        if self.timestamp < 0:
            raise DataError(f"negative timestamp {self.timestamp}")

    @property
    def day(self) -> int:
        return day_index(self.timestamp)


@dataclass(frozen=True)
class ItemRecord:
    item: str
    title: str = ""
    brand: str = ""
    categories: tuple[str, ...] = ()
    description: str = ""
    city: str = ""

    def text_fields(self) -> list[str]:
        """Metadata fields in document order; absent ones are skipped."""
        parts = [self.title, self.brand, *self.categories, self.description, self.city]
        return [p for p in parts if p]


@dataclass(frozen=True)
class UserSequence:
    user: str
    items: tuple[str, ...]
    timestamps: tuple[int, ...]

    def __post_init__(self):
        if len(self.items) != len(self.timestamps) or not self.items:
            raise DataError(f"user {self.user!r}: items/timestamps must be equal, non-empty")
        if any(a > b for a, b in zip(self.timestamps, self.timestamps[1:])):
            raise DataError(f"user {self.user!r}: timestamps not non-decreasing")

    def __len__(self):
        return len(self.items)

    @property
    def days(self) -> tuple[int, ...]:
        return tuple(day_index(t) for t in self.timestamps)

    def head(self, n: int) -> "UserSequence":
        return UserSequence(self.user, self.items[:n], self.timestamps[:n])

    def tail(self, n: int) -> "UserSequence":
        """The most recent ``n`` interactions."""
        return UserSequence(self.user, self.items[-n:], self.timestamps[-n:])


@dataclass(frozen=True)
class HeldOut:
    """A history prefix plus the interaction held out after it."""

    prefix: UserSequence
    item: str
    timestamp: int

    @property
    def user(self) -> str:
        return self.prefix.user

    @property
    def day(self) -> int:
        return day_index(self.timestamp)


@dataclass
class SplitDataset:
    train: dict[str, UserSequence] = field(default_factory=dict)
    valid: dict[str, HeldOut] = field(default_factory=dict)
    test: dict[str, HeldOut] = field(default_factory=dict)

    def held_out(self, role: str) -> dict[str, HeldOut]:
        if role == "valid":
            return self.valid
        if role == "test":
            return self.test
        raise ValueError(f"role must be 'valid' or 'test', got {role!r}")

    def train_interactions(self) -> list[Interaction]:
        return [
            Interaction(seq.user, item, ts)
            for seq in self.train.values()
            for item, ts in zip(seq.items, seq.timestamps)
        ]

    def valid_interactions(self) -> list[Interaction]:
        return [Interaction(h.user, h.item, h.timestamp) for h in self.valid.values()]


def _parse_event(obj: dict, lineno: int) -> Interaction:
    for name in ("user", "item"):
        value = obj.get(name)
        if not isinstance(value, str) or not value:
            raise DataError(f"line {lineno}: field {name!r} must be a non-empty string")
    ts = obj.get("timestamp")
    if isinstance(ts, bool) or not isinstance(ts, int):
        raise DataError(f"line {lineno}: field 'timestamp' must be an integer, got {ts!r}")
    if ts < 0:
        raise DataError(f"line {lineno}: field 'timestamp' must be >= 0")
    return Interaction(obj["user"], obj["item"], ts)


def _iter_json_lines(path: Path):
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}: line {lineno}: invalid JSON ({exc.msg})") from None
            if not isinstance(obj, dict):
                raise DataError(f"{path}: line {lineno}: expected a JSON object")
            yield lineno, obj


def load_events(path) -> list[Interaction]:
    """Read an events JSON Lines file. Duplicates are preserved."""
    path = Path(path)
    events = []
    for lineno, obj in _iter_json_lines(path):
        try:
            events.append(_parse_event(obj, lineno))
        except DataError as exc:
            raise DataError(f"{path}: {exc}") from None
    return events


def load_metadata(path) -> list[ItemRecord]:
    path = Path(path)
    records: dict[str, ItemRecord] = {}
    for lineno, obj in _iter_json_lines(path):
        if "header" in obj:
            continue
        item = obj.get("item")
        if not isinstance(item, str) or not item:
            raise DataError(f"{path}: line {lineno}: field 'item' must be a non-empty string")
        if item in records:
            raise DataError(f"{path}: line {lineno}: duplicate item {item!r}")
        cats = obj.get("categories") or []
        if isinstance(cats, str):
            cats = [cats]
        if not isinstance(cats, list) or not all(isinstance(c, str) for c in cats):
            raise DataError(f"{path}: line {lineno}: field 'categories' must be an array of strings")
        text = {}
        for name in ("title", "brand", "description", "city"):
            value = obj.get(name) or ""
            if not isinstance(value, str):
                raise DataError(f"{path}: line {lineno}: field {name!r} must be a string")
            text[name] = value
        rec = ItemRecord(item=item, categories=tuple(cats), **text)
        if not any(s.strip() for s in rec.text_fields()):
            raise DataError(f"{path}: line {lineno}: item {item!r} has no text fields")
        records[item] = rec
    return list(records.values())


def write_events(path, events: Iterable[Interaction]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for e in events:
            fh.write(json.dumps({"user": e.user, "item": e.item, "timestamp": e.timestamp}) + "\n")


def write_metadata(path, records: Iterable[ItemRecord], header: Mapping | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        if header is not None:
            fh.write(json.dumps({"header": dict(header)}, sort_keys=True) + "\n")
        for r in records:
            obj = {
                "item": r.item,
                "title": r.title,
                "brand": r.brand,
                "categories": list(r.categories),
                "description": r.description,
                "city": r.city,
            }
            fh.write(json.dumps(obj) + "\n")


def k_core_filter(events: list[Interaction], k: int) -> list[Interaction]:
    """Drop users and items with fewer than ``k`` interactions, repeated until nothing changes."""
    if k < 1:
        raise ValueError("k must be >= 1")
    kept = list(events)
    while True:
        users = Counter(e.user for e in kept)
        items = Counter(e.item for e in kept)
        survivors = [e for e in kept if users[e.user] >= k and items[e.item] >= k]
        if len(survivors) == len(kept):
            return survivors
        kept = survivors


def build_sequences(events: Iterable[Interaction]) -> list[UserSequence]:
    """One chronological sequence per user, users sorted by id. Timestamp ties keep input order."""
    by_user: dict[str, list[Interaction]] = defaultdict(list)
    for e in events:
        by_user[e.user].append(e)
    sequences = []
    for user in sorted(by_user):
        evs = sorted(by_user[user], key=lambda e: e.timestamp)
        sequences.append(
            UserSequence(user, tuple(e.item for e in evs), tuple(e.timestamp for e in evs))
        )
    return sequences


def leave_one_out_split(sequences: Iterable[UserSequence]) -> SplitDataset:
    """Last item to test, second-last to valid, the rest to train.

    Users with fewer than three interactions keep their whole sequence in train and
    take no part in valid/test.
    """
    split = SplitDataset()
    for seq in sequences:
        n = len(seq)
        if n < 3:
            split.train[seq.user] = seq
            continue
        split.train[seq.user] = seq.head(n - 2)
        split.valid[seq.user] = HeldOut(seq.head(n - 2), seq.items[n - 2], seq.timestamps[n - 2])
        split.test[seq.user] = HeldOut(seq.head(n - 1), seq.items[n - 1], seq.timestamps[n - 1])
    return split


def interval_deltas(split: SplitDataset, role: str = "test") -> dict[str, int]:
    """Whole-day gap between each held-out interaction and the last history interaction."""
    deltas = {}
    for user, h in split.held_out(role).items():
        delta = h.day - day_index(h.prefix.timestamps[-1])
        if delta < 0:
            raise DataError(f"user {user!r}: held-out interaction precedes its history")
        deltas[user] = delta
    return deltas


def tertile_boundaries(deltas: Iterable[int]) -> tuple[int, int]:
    values = sorted(deltas)
    if not values:
        return (0, 0)
    n = len(values)
    return values[math.ceil(n / 3) - 1], values[math.ceil(2 * n / 3) - 1]


def interval_group(
    split: SplitDataset,
    boundaries: tuple[int, int] | None = None,
    role: str = "test",
) -> dict[str, str]:
    """Label users Short / Middle / Long by the gap before their held-out interaction.

    With ``boundaries=None`` the cut points are the tertiles of the observed gaps.
    """
    deltas = interval_deltas(split, role)
    if boundaries is None:
        b1, b2 = tertile_boundaries(deltas.values())
    else:
        b1, b2 = boundaries
        if not b1 < b2:
            raise ValueError(f"interval boundaries must satisfy b1 < b2, got {boundaries}")
    groups = {}
    for user, delta in deltas.items():
        if delta <= b1:
            groups[user] = SHORT
        elif delta <= b2:
            groups[user] = MIDDLE
        else:
            groups[user] = LONG
    return groups


def _seq_obj(seq: UserSequence) -> dict:
    return {"user": seq.user, "items": list(seq.items), "timestamps": list(seq.timestamps)}


def save_split(path, split: SplitDataset, header: Mapping | None = None) -> None:
    """JSON Lines, one record per (role, user); an optional leading header record."""
    with open(path, "w", encoding="utf-8") as fh:
        if header is not None:
            fh.write(json.dumps({"header": dict(header)}, sort_keys=True) + "\n")
        for seq in split.train.values():
            fh.write(json.dumps({"role": "train", **_seq_obj(seq)}) + "\n")
        for role, held in (("valid", split.valid), ("test", split.test)):
            for h in held.values():
                obj = {"role": role, **_seq_obj(h.prefix), "target": h.item, "target_timestamp": h.timestamp}
                fh.write(json.dumps(obj) + "\n")


def load_split(path) -> tuple[SplitDataset, dict]:
    path = Path(path)
    split = SplitDataset()
    header: dict = {}
    for lineno, obj in _iter_json_lines(path):
        if "header" in obj:
            header = obj["header"]
            continue
        try:
            seq = UserSequence(obj["user"], tuple(obj["items"]), tuple(obj["timestamps"]))
            role = obj["role"]
            if role == "train":
                split.train[seq.user] = seq
            elif role in ("valid", "test"):
                split.held_out(role)[seq.user] = HeldOut(seq, obj["target"], int(obj["target_timestamp"]))
            else:
                raise DataError(f"unknown role {role!r}")
        except (KeyError, TypeError, DataError) as exc:
            raise DataError(f"{path}: line {lineno}: bad split record ({exc})") from None
    return split, header
