"""Tokenization, sentence splitting, stopword removal and stemming.

All downstream modules go through these helpers so that token indices in
entity annotations, gazetteer matches and graph windows agree.
"""

from __future__ import annotations

import re
from functools import lru_cache
from importlib import resources

from nltk.stem import PorterStemmer

# dotted initialisms (U.S., D.C.) keep their final period
_TOKEN_RE = re.compile(r"(?:[A-Za-z]\.){2,}(?![A-Za-z0-9])|[A-Za-z0-9]+(?:['’.\-&][A-Za-z0-9]+)*")
_BOUNDARY_RE = re.compile(r"[.!?]+[\"'’”)\]]*\s+|\n\s*\n")
_POSSESSIVE_RE = re.compile(r"['’]s$|['’]$", re.IGNORECASE)

# tokens that end in a period without ending a sentence
_ABBREVIATIONS = frozenset(
    "mr mrs ms dr st jr sr gov sen rep gen lt col capt sgt prof rev mt ft no vs etc "
    "jan feb mar apr jun jul aug sep sept oct nov dec inc corp co ltd".split()
)

_stemmer = PorterStemmer()


@lru_cache(maxsize=1)
def stopwords() -> frozenset[str]:
    """The shipped English stopword list."""
    raw = resources.files("celetrip").joinpath("data/stopwords_en.txt").read_text("utf-8")
    return frozenset(w.strip() for w in raw.splitlines() if w.strip())


def tokenize(sentence: str) -> list[str]:
    return _TOKEN_RE.findall(sentence)


def split_sentences(text: str) -> list[str]:
    """Split raw text into sentences.

    A boundary is a run of ``.!?`` followed by whitespace, unless the token
    before it is a known abbreviation or a single-letter initial, or the
    next character is lowercase or a digit.  Blank lines always split.
    """
    out: list[str] = []
    start = 0
    for m in _BOUNDARY_RE.finditer(text):
        end = m.end()
        if m.group(0).strip():
            before = text[start:m.start()].split()
            last = before[-1].lower().rstrip(".") if before else ""
            nxt = text[end:end + 1]
            if last in _ABBREVIATIONS or (len(last) == 1 and last.isalpha() and m.group(0)[0] == "."):
                continue
            if nxt and (nxt.islower() or nxt.isdigit()):
                continue
        piece = text[start:end].strip()
        if piece:
            out.append(piece)
        start = end
    tail = text[start:].strip()
    if tail:
        out.append(tail)
    return out


def normalize_token(token: str) -> str:
    """Lowercase and strip a trailing possessive (``Korea's`` -> ``korea``)."""
    return _POSSESSIVE_RE.sub("", token.lower())


@lru_cache(maxsize=65536)
def stem(token: str) -> str:
    return _stemmer.stem(token)


def stem_tokens(tokens: list[str]) -> list[str]:
    """Lowercase, drop stopwords and punctuation, Porter-stem."""
    stops = stopwords()
    out = []
    for tok in tokens:
        low = tok.lower()
        if low in stops:
            continue
        low = normalize_token(low)
        low = re.sub(r"[^a-z0-9]", "", low)
        if not low or low in stops:
            continue
        out.append(stem(low))
    return out


def sentence_tokens(text: str) -> list[list[str]]:
    """Raw token lists per sentence; sentences without word tokens are dropped."""
    return [toks for toks in (tokenize(s) for s in split_sentences(text)) if toks]


def preprocess(text: str) -> list[list[str]]:
    """Sentence-split, lowercase, strip punctuation, remove stopwords, stem.

    Sentences reduced to nothing by stopword removal stay as empty lists so
    that the sentence count matches :func:`sentence_tokens`.
    """
    return [stem_tokens(toks) for toks in sentence_tokens(text)]


def name_stems(name: str) -> list[str]:
    return [s for sent in preprocess(name) for s in sent]
