import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tempogr.corpus import Interaction
from tempogr.trend import (
    DailyCounts,
    TrendTable,
    aggregate,
    build_trend_table,
    load_trend_table,
    rerank_external,
    save_trend_table,
    trend_score,
)

DAY = 86400


def on_day(item, day, user="u"):
    return Interaction(user, item, day * DAY + 123)


# window


def test_recommendation_day_excluded():
    t = build_trend_table([on_day("a", 100)], 100, 7)
    assert t.counts.get("a", 0) == 0


def test_day_before_included():
    t = build_trend_table([on_day("a", 99)], 100, 7)
    assert t.counts["a"] == 1


def test_window_spans_n_plus_one_days():
    t_rec = 100
    events = [on_day(f"d{d}", t_rec - d) for d in range(1, 10)]
    t = build_trend_table(events, t_rec, 7)
    assert set(t.counts) == {f"d{d}" for d in range(1, 9)}
    assert t.window == (t_rec - 8, t_rec - 1)


def test_window_needs_positive_n():
    with pytest.raises(ValueError):
        build_trend_table([], 5, 0)


@settings(max_examples=100)
@given(
    st.lists(st.tuples(st.sampled_from("abcde"), st.integers(0, 60)), max_size=60),
    st.integers(10, 50),
    st.sampled_from([7, 30]),
    st.integers(-5, 400),
)
def test_window_shift_invariance_and_fast_path(evs, t_rec, N, shift):
    base = [on_day(i, d + 10) for i, d in evs]
    moved = [on_day(i, d + 10 + shift) for i, d in evs]
    a = build_trend_table(base, t_rec, N)
    b = build_trend_table(moved, t_rec + shift, N)
    assert a.counts == b.counts
    assert DailyCounts(base).table(t_rec, N).counts == a.counts


# scores


def test_trend_score_values():
    t = TrendTable(0, 7, {"top": 4, "half": 2})
    assert trend_score(t, "top") == pytest.approx(math.log(2), abs=1e-12)
    assert trend_score(t, "top") == pytest.approx(0.693147, abs=1e-6)
    assert trend_score(t, "half") == pytest.approx(0.405465, abs=1e-6)
    assert trend_score(t, "none") == 0.0


def test_empty_window_scores_zero():
    t = TrendTable(0, 7, {})
    assert t.r_max == 0
    assert trend_score(t, "a") == 0.0


@given(st.dictionaries(st.sampled_from("abcdef"), st.integers(0, 50)), st.sampled_from("abcdefg"))
def test_trend_bounded(counts, item):
    s = trend_score(TrendTable(0, 7, counts), item)
    assert 0.0 <= s <= math.log(2) + 1e-15


# aggregation


def test_aggregate_flip_example():
    t = TrendTable(0, 7, {"b": 3})
    out = aggregate([("a", -1.0), ("b", -1.2)], t, 0.5)
    assert [e.item for e in out] == ["b", "a"]
    assert out[0].final_score == pytest.approx(-1.2 + 0.5 * math.log(2), abs=1e-12)
    assert out[0].final_score == pytest.approx(-0.8534, abs=1e-4)
    assert out[1].final_score == -1.0


def test_lambda_zero_keeps_beam_order():
    ranked = [("a", -1.0), ("b", -1.0), ("c", -3.0)]
    t = TrendTable(0, 7, {"c": 9, "b": 1})
    names = {"a": "x", "b": "y", "c": "z"}
    assert [e.item for e in aggregate(ranked, t, 0.0, names)] == ["a", "b", "c"]


def test_huge_lambda_puts_max_trend_first():
    ranked = [("a", 0.0), ("b", -50.0), ("c", -90.0)]
    t = TrendTable(0, 7, {"c": 9, "b": 5})
    assert aggregate(ranked, t, 1e6)[0].item == "c"


def test_negative_lambda_rejected():
    with pytest.raises(ValueError):
        aggregate([("a", 0.0)], TrendTable(0, 7, {}), -0.1)


def test_rerank_external_flags_unknown_items():
    t = TrendTable(0, 7, {"ghost": 5, "a": 5})
    out = rerank_external([("ghost", -0.1), ("a", -0.2)], t, 1.0, catalog=["a"])
    by_item = {e.item: e for e in out}
    assert not by_item["ghost"].in_catalog and by_item["ghost"].trend_score == 0.0
    assert by_item["a"].in_catalog
    assert [e.item for e in out] == ["a", "ghost"]


def test_rerank_external_same_arithmetic_as_aggregate():
    t = TrendTable(0, 7, {"a": 1, "b": 4})
    cands = [("a", -0.3), ("b", -0.9), ("c", -0.4)]
    assert rerank_external(cands, t, 0.4) == aggregate(cands, t, 0.4)


def test_all_zero_table_keeps_input_order():
    cands = [("z", -1.0), ("a", -1.0), ("m", -1.0)]
    out = rerank_external(cands, TrendTable(0, 7, {}), 0.7)
    assert [e.item for e in out] == ["z", "a", "m"]


def test_single_candidate():
    out = rerank_external([("a", -5.0)], TrendTable(0, 7, {"b": 2}), 1.0)
    assert [e.item for e in out] == ["a"]


def test_max_trend_rank_non_increasing_in_lambda():
    rng = random.Random(4)
    grid = [round(0.1 * i, 1) for i in range(11)]
    for _ in range(100):
        items = [f"i{n}" for n in range(rng.randint(2, 15))]
        counts = {i: rng.randint(0, 5) for i in items}
        star = rng.choice(items)
        counts[star] = 9  # strict maximum
        t = TrendTable(0, 7, counts)
        ranked = [(i, -rng.random() * 3) for i in items]
        ranked.sort(key=lambda x: -x[1])
        names = {i: i for i in items}
        ranks = [[e.item for e in aggregate(ranked, t, lam, names)].index(star) for lam in grid]
        assert all(b <= a for a, b in zip(ranks, ranks[1:]))


def test_table_round_trip(tmp_path):
    t = TrendTable(100, 7, {"b": 2, "a": 1})
    save_trend_table(tmp_path / "t.json", t)
    assert load_trend_table(tmp_path / "t.json") == t
