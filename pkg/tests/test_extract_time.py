import json
from datetime import date, timedelta

import pytest
from hypothesis import given, strategies as st

from celetrip.corpus import Article, Corpus
from celetrip.extract_time import annotate_corpus_dates, extract_dates, mentioned_dates
from helpers import FIXTURES

CASES = json.loads((FIXTURES / "dates.json").read_text(encoding="utf-8"))


def _run(case):
    pub = date.fromisoformat(case["publish_date"]) if case["publish_date"] else None
    return [[m.kind, m.resolved.isoformat() if m.resolved else None, m.text] for m in extract_dates(case["text"], pub)]


def test_fixture_size_and_coverage():
    assert len(CASES) == 60
    kinds = {c["pattern"] for c in CASES}
    assert kinds >= {"month_d_yyyy", "month_d_yyyy_space", "d_month_yyyy", "iso", "us_numeric", "month_d",
                     "weekday", "last_weekday", "next_weekday", "yesterday", "today", "tomorrow"}


@pytest.mark.parametrize("case", CASES, ids=[f"{i:02d}-{c['pattern']}" for i, c in enumerate(CASES)])
def test_fixture_case(case):
    assert _run(case) == case["expected"]


def test_span_points_at_text():
    text = "He arrived on July 16, 2022 and left yesterday."
    for m in extract_dates(text, date(2022, 7, 18)):
        assert text[m.span[0]:m.span[1]] == m.text


def test_absolute_always_resolves():
    for m in extract_dates("On 2019-01-05 and March 1 2020.", None):
        assert m.kind == "absolute" and m.resolved is not None


def test_annotate_dedups():
    art = Article.from_text("a", "July 16, 2022 again July 16, 2022.", date(2022, 7, 20))
    annotate_corpus_dates(Corpus([art]))
    assert art.mentioned_dates == [date(2022, 7, 16)]


def test_annotate_empty_and_mixed():
    a = Article.from_text("a", "Nothing dated.", date(2022, 7, 20))
    b = Article.from_text("b", "On July 16, 2022 he came and left yesterday.", date(2022, 7, 20))
    annotate_corpus_dates(Corpus([a, b]))
    assert a.mentioned_dates == []
    assert b.mentioned_dates == [date(2022, 7, 16), date(2022, 7, 19)]


dates = st.dates(min_value=date(1990, 1, 1), max_value=date(2030, 12, 31))
# month and year boundaries plus leap days, on top of uniform draws
edges = st.sampled_from([date(2020, 2, 29), date(2020, 3, 1), date(2019, 3, 1), date(2018, 12, 31),
                         date(2019, 1, 1), date(2024, 2, 28), date(2000, 2, 29), date(2000, 12, 31)])


@given(st.one_of(dates, edges))
def test_yesterday_tomorrow(p):
    assert mentioned_dates("yesterday", p) == [p - timedelta(days=1)]
    assert mentioned_dates("tomorrow", p) == [p + timedelta(days=1)]
    assert mentioned_dates("today", p) == [p]


@given(st.one_of(dates, edges), st.sampled_from(["Monday", "Tuesday", "Wednesday", "Thursday", "Friday",
                                                  "Saturday", "Sunday"]))
def test_weekdays_within_six_days(p, day):
    bare = mentioned_dates(day, p)[0]
    last = mentioned_dates("last " + day, p)[0]
    nxt = mentioned_dates("next " + day, p)[0]
    assert bare.strftime("%A") == last.strftime("%A") == nxt.strftime("%A") == day
    assert 0 <= (p - bare).days <= 6
    assert 1 <= (p - last).days <= 7
    assert 1 <= (nxt - p).days <= 7


pieces = st.sampled_from(list("abc 0123456789/-,.") + ["July ", "May ", "yesterday ", "next Monday ", "2019-",
                                                     "Feb 29 "])
noise = st.lists(pieces, max_size=30).map("".join)


@given(noise, st.one_of(st.none(), dates))
def test_matches_never_overlap(text, p):
    ms = extract_dates(text, p)
    assert sum(m.span[1] - m.span[0] for m in ms) <= len(text)
    for a, b in zip(ms, ms[1:]):
        assert a.span[1] <= b.span[0]
    assert extract_dates(text, p) == ms
