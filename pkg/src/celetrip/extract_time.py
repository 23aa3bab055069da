"""Rule-based extraction of calendar dates from news text.

Absolute forms resolve on their own; relative forms (``yesterday``,
``last Monday``, a bare ``Month D``) need the publication date as anchor.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from datetime import date, timedelta
from typing import Callable, Iterable

_MONTHS = {
    "january": 1, "february": 2, "march": 3, "april": 4, "may": 5, "june": 6,
    "july": 7, "august": 8, "september": 9, "october": 10, "november": 11, "december": 12,
    "jan": 1, "feb": 2, "mar": 3, "apr": 4, "jun": 6, "jul": 7, "aug": 8,
    "sep": 9, "sept": 9, "oct": 10, "nov": 11, "dec": 12,
}
_WEEKDAYS = {
    "monday": 0, "tuesday": 1, "wednesday": 2, "thursday": 3,
    "friday": 4, "saturday": 5, "sunday": 6,
}

_MONTH = (
    r"(?P<month>January|February|March|April|May|June|July|August|September|October|"
    r"November|December|Jan\.?|Feb\.?|Mar\.?|Apr\.?|Jun\.?|Jul\.?|Aug\.?|Sept\.?|Sep\.?|"
    r"Oct\.?|Nov\.?|Dec\.?)"
)
_DAY = r"(?P<day>[0-3]?\d)(?:st|nd|rd|th)?"
_YEAR = r"(?P<year>(?:1[89]|20|21)\d\d)"
_WEEKDAY = r"(?P<weekday>Monday|Tuesday|Wednesday|Thursday|Friday|Saturday|Sunday)"
_L, _R = r"(?<![\w/-])", r"(?![\w/-])"


@dataclass(frozen=True)
class DateMatch:
    span: tuple[int, int]
    kind: str  # "absolute" | "relative"
    resolved: date | None
    text: str = ""


def _month(m: re.Match) -> int:
    return _MONTHS[m.group("month").rstrip(".").lower()]


def _absolute_mdy(m, _pub):
    return date(int(m.group("year")), _month(m), int(m.group("day")))


def _iso(m, _pub):
    return date(int(m.group("year")), int(m.group("mm")), int(m.group("dd")))


def _us_numeric(m, _pub):
    return date(int(m.group("year")), int(m.group("mm")), int(m.group("dd")))


def _month_day(m, pub):
    if pub is None:
        return None
    return date(pub.year, _month(m), int(m.group("day")))


def _bare_weekday(m, pub):
    if pub is None:
        return None
    back = (pub.weekday() - _WEEKDAYS[m.group("weekday").lower()]) % 7
    return pub - timedelta(days=back)


def _last_weekday(m, pub):
    if pub is None:
        return None
    back = (pub.weekday() - _WEEKDAYS[m.group("weekday").lower()]) % 7 or 7
    return pub - timedelta(days=back)


def _next_weekday(m, pub):
    if pub is None:
        return None
    ahead = (_WEEKDAYS[m.group("weekday").lower()] - pub.weekday()) % 7 or 7
    return pub + timedelta(days=ahead)


def _offset(days: int):
    def resolve(_m, pub):
        return None if pub is None else pub + timedelta(days=days)
    return resolve


Resolver = Callable[[re.Match, "date | None"], "date | None"]

_PATTERNS: list[tuple[re.Pattern, str, Resolver]] = [
    (re.compile(_L + _MONTH + r"\s+" + _DAY + r",\s*" + _YEAR + _R), "absolute", _absolute_mdy),
    (re.compile(_L + _MONTH + r"\s+" + _DAY + r"\s+" + _YEAR + _R), "absolute", _absolute_mdy),
    (re.compile(_L + _DAY + r"\s+" + _MONTH + r",?\s+" + _YEAR + _R), "absolute", _absolute_mdy),
    (re.compile(_L + _YEAR + r"-(?P<mm>[01]\d)-(?P<dd>[0-3]\d)" + _R), "absolute", _iso),
    (re.compile(_L + r"(?P<mm>[01]?\d)/(?P<dd>[0-3]?\d)/" + _YEAR + _R), "absolute", _us_numeric),
    (re.compile(_L + _MONTH + r"\s+" + _DAY + r"(?![\w/-]|,?\s*\d)"), "relative", _month_day),
    (re.compile(r"(?<!\w)(?i:last)\s+" + _WEEKDAY + r"(?!\w)"), "relative", _last_weekday),
    (re.compile(r"(?<!\w)(?i:next)\s+" + _WEEKDAY + r"(?!\w)"), "relative", _next_weekday),
    (re.compile(r"(?<!\w)" + _WEEKDAY + r"(?!\w)"), "relative", _bare_weekday),
    (re.compile(r"(?<!\w)(?i:yesterday)(?!\w)"), "relative", _offset(-1)),
    (re.compile(r"(?<!\w)(?i:today)(?!\w)"), "relative", _offset(0)),
    (re.compile(r"(?<!\w)(?i:tomorrow)(?!\w)"), "relative", _offset(1)),
]


def extract_dates(text: str, publish_date: date | None = None) -> list[DateMatch]:
    """Find date expressions in ``text``.

    Matches never overlap; when candidates overlap the longest wins, then the
    leftmost.  Impossible calendar dates (Feb 30) are skipped silently.
    Relative matches carry ``resolved=None`` when ``publish_date`` is unknown.
    """
    candidates: list[DateMatch] = []
    for pattern, kind, resolver in _PATTERNS:
        for m in pattern.finditer(text):
            try:
                resolved = resolver(m, publish_date)
            except ValueError:
                continue
            candidates.append(DateMatch(m.span(), kind, resolved, m.group(0)))

    candidates.sort(key=lambda c: (-(c.span[1] - c.span[0]), c.span[0]))
    taken: list[DateMatch] = []
    for c in candidates:
        if all(c.span[1] <= t.span[0] or c.span[0] >= t.span[1] for t in taken):
            taken.append(c)
    taken.sort(key=lambda c: c.span[0])
    return taken


def mentioned_dates(text: str, publish_date: date | None = None) -> list[date]:
    """Deduplicated resolved dates in order of first appearance."""
    return list(dict.fromkeys(m.resolved for m in extract_dates(text, publish_date) if m.resolved))


def annotate_corpus_dates(corpus: Iterable):
    """Fill ``mentioned_dates`` on every article in place and return the corpus."""
    for art in corpus:
        art.mentioned_dates = mentioned_dates(art.text, art.publish_date)
    return corpus
