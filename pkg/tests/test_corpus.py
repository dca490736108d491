import json
import math
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tempogr.corpus import (
    LONG,
    MIDDLE,
    SHORT,
    HeldOut,
    Interaction,
    SplitDataset,
    UserSequence,
    build_sequences,
    interval_group,
    k_core_filter,
    leave_one_out_split,
    load_events,
    load_metadata,
    load_split,
    save_split,
)
from tempogr.errors import DataError

DAY = 86400


def seq(user, items, days):
    return UserSequence(user, tuple(items), tuple(d * DAY for d in days))


# ingestion


def test_load_events_maps_fields(tmp_path):
    p = tmp_path / "events.jsonl"
    p.write_text('{"user":"u1","item":"i1","timestamp":1400000000}\n')
    assert load_events(p) == [Interaction("u1", "i1", 1400000000)]


def test_load_events_empty_file(tmp_path):
    p = tmp_path / "events.jsonl"
    p.write_text("")
    assert load_events(p) == []


def test_load_events_bad_timestamp_names_line_and_field(tmp_path):
    p = tmp_path / "events.jsonl"
    p.write_text('{"user":"u1","item":"i1","timestamp":1}\n{"user":"u1","item":"i2","timestamp":"abc"}\n')
    with pytest.raises(DataError, match=r"line 2.*timestamp"):
        load_events(p)


def test_load_events_missing_file(tmp_path):
    with pytest.raises(OSError):
        load_events(tmp_path / "nope.jsonl")


def test_load_events_keeps_duplicates(tmp_path):
    p = tmp_path / "events.jsonl"
    line = '{"user":"u1","item":"i1","timestamp":5}\n'
    p.write_text(line * 3)
    assert len(load_events(p)) == 3


def test_load_metadata_rejects_item_without_text(tmp_path):
    p = tmp_path / "meta.jsonl"
    p.write_text(json.dumps({"item": "a", "title": "", "categories": []}) + "\n")
    with pytest.raises(DataError, match="no text fields"):
        load_metadata(p)


def test_interaction_invariants():
    with pytest.raises(DataError):
        Interaction("", "i", 0)
    with pytest.raises(DataError):
        Interaction("u", "i", -1)


# k-core


def test_k_core_chain_cascades_to_empty():
    events = [Interaction("u1", "i1", 1), Interaction("u1", "i2", 2), Interaction("u2", "i2", 3)]
    assert k_core_filter(events, 2) == []


def test_k_core_already_dense_is_unchanged():
    events = [Interaction(f"u{u}", f"i{i}", u * 10 + i) for u in range(5) for i in range(5)]
    assert k_core_filter(events, 5) == events


def test_k_core_one_keeps_everything():
    events = [Interaction("u1", "i1", 1), Interaction("u2", "i2", 2)]
    assert k_core_filter(events, 1) == events


event_lists = st.lists(
    st.builds(
        Interaction,
        user=st.sampled_from([f"u{i}" for i in range(8)]),
        item=st.sampled_from([f"i{i}" for i in range(8)]),
        timestamp=st.integers(0, 10**6),
    ),
    max_size=80,
)


def _brute_force_core(events, k):
    """Largest subset where every user and item has >= k events, by exhaustive peeling."""
    users = {e.user for e in events}
    items = {e.item for e in events}
    changed = True
    while changed:
        changed = False
        kept = [e for e in events if e.user in users and e.item in items]
        uc, ic = Counter(e.user for e in kept), Counter(e.item for e in kept)
        for u in list(users):
            if uc[u] < k:
                users.discard(u)
                changed = True
        for i in list(items):
            if ic[i] < k:
                items.discard(i)
                changed = True
    return [e for e in events if e.user in users and e.item in items]


@settings(max_examples=200)
@given(event_lists, st.integers(1, 4))
def test_k_core_fixpoint_and_idempotence(events, k):
    out = k_core_filter(events, k)
    if out:
        assert min(Counter(e.user for e in out).values()) >= k
        assert min(Counter(e.item for e in out).values()) >= k
    assert k_core_filter(out, k) == out
    assert out == _brute_force_core(events, k)


# sequences and split


def test_build_sequences_sorts_by_time():
    events = [Interaction("u1", "a", 3), Interaction("u1", "b", 1), Interaction("u1", "c", 2)]
    (s,) = build_sequences(events)
    assert s.items == ("b", "c", "a")
    assert s.timestamps == (1, 2, 3)


def test_build_sequences_single_event():
    (s,) = build_sequences([Interaction("u1", "a", 3)])
    assert len(s) == 1


def test_build_sequences_stable_on_equal_timestamps():
    events = [Interaction("u1", "x", 5), Interaction("u1", "y", 5), Interaction("u1", "w", 5)]
    (s,) = build_sequences(events)
    assert s.items == ("x", "y", "w")


def test_split_four_items():
    split = leave_one_out_split([seq("u", "abcd", [0, 1, 2, 3])])
    assert split.train["u"].items == ("a", "b")
    assert split.valid["u"].item == "c"
    assert split.valid["u"].prefix.items == ("a", "b")
    assert split.test["u"].item == "d"
    assert split.test["u"].prefix.items == ("a", "b", "c")


def test_split_two_items_excluded_from_held_out():
    split = leave_one_out_split([seq("u", "ab", [0, 1])])
    assert "u" not in split.valid and "u" not in split.test
    assert split.train["u"].items == ("a", "b")


def test_split_three_items():
    split = leave_one_out_split([seq("u", "abc", [0, 1, 2])])
    assert split.train["u"].items == ("a",)
    assert (split.valid["u"].item, split.test["u"].item) == ("b", "c")


@given(st.lists(st.sampled_from("abcdef"), min_size=1, max_size=30))
def test_split_partitions_each_sequence(items):
    s = seq("u", items, range(len(items)))
    split = leave_one_out_split([s])
    if len(items) < 3:
        assert split.train["u"] == s
        return
    rebuilt = split.train["u"].items + (split.valid["u"].item, split.test["u"].item)
    assert rebuilt == tuple(items)
    assert split.test["u"].prefix.items == tuple(items[:-1])


# interval groups


def _split_with_gaps(gaps):
    split = SplitDataset()
    for n, gap in enumerate(gaps):
        prefix = seq(f"u{n}", "ab", [0, 1])
        split.test[f"u{n}"] = HeldOut(prefix, "c", (1 + gap) * DAY)
    return split


def test_interval_group_fixed_boundaries():
    groups = interval_group(_split_with_gaps([0, 30, 61, 7, 60]), (7, 60))
    assert groups == {"u0": SHORT, "u1": MIDDLE, "u2": LONG, "u3": SHORT, "u4": MIDDLE}


def test_interval_group_needs_ordered_boundaries():
    with pytest.raises(ValueError):
        interval_group(_split_with_gaps([1]), (5, 5))


def test_interval_group_negative_gap_is_an_error():
    split = SplitDataset()
    split.test["u"] = HeldOut(seq("u", "ab", [0, 5]), "c", 3 * DAY)
    with pytest.raises(DataError):
        interval_group(split, (1, 2))


def test_interval_gap_is_whole_days():
    split = SplitDataset()
    prefix = UserSequence("u", ("a",), (DAY - 1,))
    split.test["u"] = HeldOut(prefix, "b", DAY)  # one second later, next calendar day
    assert interval_group(split, (0, 5)) == {"u": MIDDLE}


@settings(max_examples=200)
@given(st.lists(st.integers(0, 400), min_size=1, max_size=60, unique=True))
def test_tertile_groups_are_balanced(gaps):
    groups = interval_group(_split_with_gaps(gaps))
    assert set(groups) == {f"u{n}" for n in range(len(gaps))}
    counts = Counter(groups.values())
    n = len(gaps)
    for g in (SHORT, MIDDLE, LONG):
        assert abs(counts[g] - math.ceil(n / 3)) <= 1


@given(st.lists(st.integers(0, 400), min_size=1, max_size=60))
def test_tertile_groups_total_partition(gaps):
    groups = interval_group(_split_with_gaps(gaps))
    assert len(groups) == len(gaps)
    assert set(groups.values()) <= {SHORT, MIDDLE, LONG}


def test_split_round_trip(tmp_path):
    split = leave_one_out_split([seq("u", "abcd", [0, 1, 2, 3]), seq("v", "ab", [0, 4])])
    save_split(tmp_path / "s.jsonl", split, {"fingerprint": "x"})
    back, header = load_split(tmp_path / "s.jsonl")
    assert back == split
    assert header == {"fingerprint": "x"}
