import datetime as dt

import pytest
from hypothesis import given
from hypothesis import strategies as st

from tempogr.corpus import UserSequence
from tempogr.identifiers import TextualId
from tempogr.prompting import (
    PromptConfig,
    PromptVariant,
    build_prompt,
    format_date,
    format_interval,
    render_transition_context,
    render_user_context,
)
from tempogr.transition import TransitionGraph

V = PromptVariant
DAY = 86400


# dates and intervals


@pytest.mark.parametrize("day, text", [(0, "1970-01-01"), (16252, "2014-07-01"), (16282, "2014-07-31")])
def test_format_date(day, text):
    assert format_date(day) == text


@given(st.integers(0, 80000))
def test_format_date_matches_calendar(day):
    oracle = dt.datetime.fromtimestamp(day * DAY, tz=dt.timezone.utc).date().isoformat()
    assert format_date(day) == oracle


@pytest.mark.parametrize(
    "days, text",
    [(0, "same day"), (14, "14 days"), (395, "1 years, 1 months"), (30, "1 months"), (396, "1 years, 1 months, 1 days")],
)
def test_format_interval(days, text):
    assert format_interval(days) == text


def test_format_interval_rejects_negative():
    with pytest.raises(ValueError):
        format_interval(-1)


# user context templates


def test_none_lists_most_recent_first():
    assert render_user_context(["i1", "i2"], [0, 5], 9, V.NONE) == "What would the user purchase after i2, i1 ?"


def test_chronological_order_flag():
    text = render_user_context(["i1", "i2"], [0, 5], 9, V.NONE, most_recent_first=False)
    assert text == "What would the user purchase after i1, i2 ?"


def test_target_relative_absolute_template():
    d = 16252
    text = render_user_context(["x"], [d], d + 14, V.TARGET_RELATIVE_ABSOLUTE)
    assert text == "The current date is 2014-07-15. What would the user purchase after x (2014-07-01, 14 days ago) ?"


def test_relative_annotates_all_but_last():
    text = render_user_context(["a", "b"], [0, 1], 3, V.RELATIVE, most_recent_first=False)
    assert text == "What would the user purchase after a (after 1 days), b ?"


def test_target_relative_template():
    text = render_user_context(["a", "b"], [0, 10], 10, V.TARGET_RELATIVE)
    assert text == "What would the user purchase after b (same day ago), a (10 days ago) ?"


def test_absolute_template():
    text = render_user_context(["a"], [16252], 16300, V.ABSOLUTE)
    assert text == "What would the user purchase after a (2014-07-01) ?"


def test_relative_absolute_template():
    text = render_user_context(["a", "b"], [16252, 16266], 16300, V.RELATIVE_ABSOLUTE, most_recent_first=False)
    assert text == "What would the user purchase after a (2014-07-01, after 14 days), b (2014-07-15) ?"


def test_empty_history_is_an_error():
    with pytest.raises(ValueError):
        render_user_context([], [], 0, V.NONE)


def test_variant_aliases():
    assert V.parse("TargetRelativeAbsolute") is V.TARGET_RELATIVE_ABSOLUTE
    assert V.parse("tra") is V.TARGET_RELATIVE_ABSOLUTE
    assert V.parse("target-relative") is V.TARGET_RELATIVE
    assert len(V) == 6
    with pytest.raises(ValueError):
        V.parse("bogus")


histories = st.lists(st.integers(0, 40), min_size=1, max_size=10).map(lambda gaps: [sum(gaps[: i + 1]) for i in range(len(gaps))])


@given(histories, st.integers(0, 100), st.integers(1, 20000))
def test_target_relative_shift_invariance(days, lead, base):
    ids = [f"i{n}" for n in range(len(days))]
    days = [base + d for d in days]
    inference = days[-1] + lead
    for v in (V.TARGET_RELATIVE, V.RELATIVE, V.NONE):
        assert render_user_context(ids, days, inference, v) == render_user_context(
            ids, [d + 37 for d in days], inference + 37, v
        )
    for v in (V.ABSOLUTE, V.TARGET_RELATIVE_ABSOLUTE):
        assert render_user_context(ids, days, inference, v) != render_user_context(
            ids, [d + 37 for d in days], inference + 37, v
        )


@given(histories, histories, st.integers(0, 100))
def test_none_ignores_timestamps(a, b, lead):
    n = min(len(a), len(b))
    ids = [f"i{k}" for k in range(n)]
    assert render_user_context(ids, a[:n], a[n - 1] + lead, V.NONE) == render_user_context(
        ids, b[:n], b[n - 1], V.NONE
    )


# transition context


def test_transition_line():
    assert render_transition_context(["a"], [["b"]]) == "After a, users often buy: b."


def test_transition_lines_keep_given_order():
    text = render_transition_context(["recent", "older"], [["x", "y"], ["z"]])
    assert text.splitlines() == ["After recent, users often buy: x y.", "After older, users often buy: z."]


def test_empty_neighbor_set():
    assert render_transition_context(["a"], [[]]) == "After a, users often buy: ."


# full prompt


def _ids(*items):
    return {i: TextualId(i, (i, "tok")) for i in items}


def test_build_prompt_truncates_and_uses_graph():
    items = [f"i{n}" for n in range(25)]
    hist = UserSequence("u", tuple(items), tuple(n * DAY for n in range(25)))
    graph = TransitionGraph({"i24": {"i3": [1], "i4": [5]}, "i23": {"i24": [1]}})
    ids = _ids(*items)
    pair = build_prompt(hist, 30, ids, graph, PromptConfig(max_seq_len=20, k=1, L=2))
    assert len(pair.features.items) == 20
    assert pair.c_u.count("-tok") == 20
    assert pair.features.last_items == ("i24", "i23")
    assert pair.c_v == "After i24-tok, users often buy: i3-tok.\nAfter i23-tok, users often buy: i24-tok."
    assert pair.features.target_intervals[-1] == 6


def test_prompt_is_deterministic():
    hist = UserSequence("u", ("a", "b"), (0, DAY))
    cfg = PromptConfig()
    one = build_prompt(hist, 3, _ids("a", "b"), TransitionGraph(), cfg)
    two = build_prompt(hist, 3, _ids("a", "b"), TransitionGraph(), cfg)
    assert one == two
    assert one.c_v == "After b-tok, users often buy: .\nAfter a-tok, users often buy: ."


def test_inference_day_before_history_rejected():
    hist = UserSequence("u", ("a",), (10 * DAY,))
    with pytest.raises(ValueError):
        build_prompt(hist, 3, _ids("a"), TransitionGraph(), PromptConfig())
