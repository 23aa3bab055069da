"""Corpus ingestion, article selection and trip-instance construction."""

from __future__ import annotations

import csv
import json
import logging
import re
import warnings
from collections import defaultdict
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

from celetrip.extract_geo import GazetteerIndex, LocationMention, match_locations, resolve_containment
from celetrip.extract_time import annotate_corpus_dates
from celetrip.text import normalize_token, sentence_tokens, stem_tokens

log = logging.getLogger(__name__)

ENTITY_TYPES = frozenset({"PERSON", "NORP", "FACILITY", "ORGANIZATION", "GPE_LOC", "EVENT", "DATE"})


class CorpusError(ValueError):
    pass


@dataclass(frozen=True)
class EntityMention:
    surface: str
    type: str
    sentence_index: int
    token_span: tuple[int, int]

    def __post_init__(self):
        if self.type not in ENTITY_TYPES:
            raise CorpusError(f"unknown entity type {self.type!r}")
        if self.token_span[1] <= self.token_span[0]:
            raise CorpusError(f"empty token span {self.token_span} for {self.surface!r}")


@dataclass
class Article:
    id: str
    text: str
    publish_date: date | None = None
    sentences: list[list[str]] = field(default_factory=list)
    raw_sentences: list[list[str]] = field(default_factory=list)
    mentions: list[EntityMention] = field(default_factory=list)
    mentioned_dates: list[date] = field(default_factory=list)

    @classmethod
    def from_text(cls, id: str, text: str, publish_date: date | None = None,
                  mentions: Iterable[EntityMention] = ()) -> "Article":
        raw = sentence_tokens(text)
        art = cls(id=id, text=text, publish_date=publish_date,
                  sentences=[stem_tokens(toks) for toks in raw], raw_sentences=raw,
                  mentions=list(mentions))
        for m in art.mentions:
            if not 0 <= m.sentence_index < len(raw) or m.token_span[1] > len(raw[m.sentence_index]) or m.token_span[0] < 0:
                raise CorpusError(f"article {id}: mention {m.surface!r} span {m.token_span} "
                                  f"outside sentence {m.sentence_index}")
        return art

    def dates(self) -> set[date]:
        out = set(self.mentioned_dates)
        if self.publish_date is not None:
            out.add(self.publish_date)
        return out


@dataclass(frozen=True)
class TripInstance:
    celebrity: str
    location: str
    date: date
    article_ids: tuple[str, ...]
    label: int | None = None  # 1 visited, 0 not visited

    def __post_init__(self):
        if not self.article_ids:
            raise CorpusError(f"trip instance ({self.celebrity}, {self.location}, {self.date}) has no articles")


class Corpus:
    """Ordered, id-indexed article collection.  Read-only once built."""

    def __init__(self, articles: Iterable[Article] = ()):
        self._articles: dict[str, Article] = {}
        for art in articles:
            if art.id in self._articles:
                raise CorpusError(f"duplicate article id {art.id!r}")
            self._articles[art.id] = art
        self._by_date: dict[date, list[str]] | None = None

    def __len__(self) -> int:
        return len(self._articles)

    def __iter__(self) -> Iterator[Article]:
        return iter(self._articles.values())

    def __contains__(self, article_id: str) -> bool:
        return article_id in self._articles

    def __getitem__(self, article_id: str) -> Article:
        return self._articles[article_id]

    @property
    def ids(self) -> list[str]:
        return list(self._articles)

    def subset(self, ids: Iterable[str]) -> "Corpus":
        return Corpus(self._articles[i] for i in ids)

    def by_date(self, d: date) -> list[str]:
        """Ids of articles published on ``d`` or mentioning ``d``, in corpus order."""
        if self._by_date is None:
            table: dict[date, list[str]] = defaultdict(list)
            for art in self:
                for dd in sorted(art.dates()):
                    table[dd].append(art.id)
            order = {aid: i for i, aid in enumerate(self._articles)}
            for ids in table.values():
                ids.sort(key=order.__getitem__)
            self._by_date = dict(table)
        return list(self._by_date.get(d, []))

    def published_on(self, d: date) -> list[Article]:
        return [a for a in self if a.publish_date == d]


def _parse_date(value) -> date | None:
    if value is None or value == "":
        return None
    return date.fromisoformat(str(value))


def article_from_record(obj: Mapping, lineno: int | None = None) -> Article:
    where = f"line {lineno}: " if lineno is not None else ""
    if not isinstance(obj, Mapping) or "id" not in obj or "text" not in obj:
        raise CorpusError(f"{where}article object needs 'id' and 'text'")
    try:
        pub = _parse_date(obj.get("publish_date"))
    except ValueError:
        warnings.warn(f"{where}article {obj['id']}: unparseable publish_date {obj.get('publish_date')!r}; left empty")
        pub = None
    mentions = []
    for m in obj.get("mentions") or []:
        try:
            mentions.append(EntityMention(m["surface"], m["type"], int(m["sentence"]),
                                          (int(m["start"]), int(m["end"]))))
        except (KeyError, TypeError, ValueError) as exc:
            raise CorpusError(f"{where}bad mention {m!r}: {exc}") from None
    try:
        return Article.from_text(str(obj["id"]), str(obj["text"]), pub, mentions)
    except CorpusError as exc:
        raise CorpusError(f"{where}{exc}") from None


def load_corpus(path: str | Path, annotate: bool = True) -> Corpus:
    """Read a JSONL corpus, one article per line.

    Malformed lines are collected and reported together with their line
    numbers.  When ``annotate`` is set, ``mentioned_dates`` are filled by the
    date extractor.
    """
    articles: list[Article] = []
    seen: dict[str, int] = {}
    problems: list[str] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                problems.append(f"line {lineno}: invalid JSON ({exc.msg})")
                continue
            try:
                art = article_from_record(obj, lineno)
            except CorpusError as exc:
                problems.append(str(exc))
                continue
            if art.id in seen:
                raise CorpusError(f"duplicate article id {art.id!r} on lines {seen[art.id]} and {lineno}")
            seen[art.id] = lineno
            articles.append(art)
    if problems:
        raise CorpusError("malformed corpus lines:\n  " + "\n  ".join(problems))
    corpus = Corpus(articles)
    if annotate:
        annotate_corpus_dates(corpus)
    return corpus


def article_record(art: Article) -> dict:
    return {
        "id": art.id,
        "text": art.text,
        "publish_date": art.publish_date.isoformat() if art.publish_date else None,
        "mentions": [
            {"surface": m.surface, "type": m.type, "sentence": m.sentence_index,
             "start": m.token_span[0], "end": m.token_span[1]}
            for m in art.mentions
        ],
    }


def write_corpus(corpus: Iterable[Article], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for art in corpus:
            fh.write(json.dumps(article_record(art), ensure_ascii=False) + "\n")


class DictionaryTagger:
    """Exact, longest-first matching of a surface lexicon over raw tokens.

    Stands in for a statistical NER model on fixtures and synthetic data.
    """

    def __init__(self, lexicon: Mapping[str, str]):
        self.table: dict[tuple[str, ...], tuple[str, str]] = {}
        for surface, etype in lexicon.items():
            if etype not in ENTITY_TYPES:
                raise CorpusError(f"unknown entity type {etype!r} for {surface!r}")
            key = tuple(normalize_token(t) for s in sentence_tokens(surface) for t in s)
            if key:
                self.table[key] = (surface, etype)
        self.max_len = max((len(k) for k in self.table), default=0)

    def tag(self, raw_sentences: Sequence[Sequence[str]]) -> list[EntityMention]:
        out = []
        for s_idx, toks in enumerate(raw_sentences):
            norm = [normalize_token(t) for t in toks]
            i = 0
            while i < len(norm):
                for length in range(min(self.max_len, len(norm) - i), 0, -1):
                    hit = self.table.get(tuple(norm[i:i + length]))
                    if hit:
                        out.append(EntityMention(hit[0], hit[1], s_idx, (i, i + length)))
                        i += length
                        break
                else:
                    i += 1
        return out

    def tag_corpus(self, corpus: Corpus, overwrite: bool = False) -> None:
        for art in corpus:
            if overwrite or not art.mentions:
                art.mentions = self.tag(art.raw_sentences)


def load_lexicon(path: str | Path) -> dict[str, str]:
    """``surface<TAB>TYPE`` per line."""
    lex = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 2:
                raise CorpusError(f"lexicon line {lineno}: expected surface<TAB>type")
            lex[parts[0]] = parts[1]
    return lex


def _name_pattern(name: str) -> re.Pattern:
    tokens = [t for s in sentence_tokens(name) for t in s]
    if not tokens:
        raise CorpusError(f"empty celebrity name {name!r}")
    return re.compile(r"(?<!\w)" + r"\s+".join(map(re.escape, tokens)) + r"(?!\w)", re.IGNORECASE)


def mentions_name(text: str, name: str) -> bool:
    return _name_pattern(name).search(text) is not None


def select_articles(corpus: Corpus, celebrity: str, d: date) -> list[str]:
    """A_{c,d}: articles dated ``d`` (published or mentioned) that name ``celebrity``.

    The name matches only as the full token sequence at word boundaries, so
    ``Trump Tower`` does not select for ``Donald Trump``.
    """
    pattern = _name_pattern(celebrity)
    return [aid for aid in corpus.by_date(d) if pattern.search(corpus[aid].text)]


def select_articles_for_location(article_ids: Sequence[str], loc: str,
                                 article_locations: Mapping[str, Sequence[str]]) -> list[str]:
    """A_{c,d,loc}: the subset of ``article_ids`` whose extracted locations include ``loc``."""
    return [aid for aid in article_ids if loc in article_locations.get(aid, ())]


def locate_corpus(corpus: Iterable[Article], index: GazetteerIndex) -> dict[str, list[LocationMention]]:
    return {art.id: match_locations(art, index) for art in corpus}


def article_candidates(mentions: Mapping[str, Sequence[LocationMention]],
                       index: GazetteerIndex) -> dict[str, list[str]]:
    """Per-article candidate locations after containment resolution."""
    return {aid: resolve_containment(ms, index) for aid, ms in mentions.items()}


def candidate_locations(article_ids: Sequence[str], mentions: Mapping[str, Sequence[LocationMention]],
                        index: GazetteerIndex, containment: str = "article") -> dict[str, list[str]]:
    """Candidate location -> A_{c,d,loc} for one article pool.

    ``containment="article"`` resolves ancestors inside each article;
    ``"pool"`` resolves once over the whole pool.
    """
    if containment == "article":
        per_article = {aid: resolve_containment(mentions.get(aid, ()), index) for aid in article_ids}
    elif containment == "pool":
        keep = set(resolve_containment([m for aid in article_ids for m in mentions.get(aid, ())], index))
        per_article = {aid: [c for c in dict.fromkeys(m.canonical for m in mentions.get(aid, ())) if c in keep]
                       for aid in article_ids}
    else:
        raise ValueError(f"containment must be 'article' or 'pool', not {containment!r}")
    out: dict[str, list[str]] = {}
    for aid in article_ids:
        for loc in per_article[aid]:
            out.setdefault(loc, []).append(aid)
    return out


@dataclass(frozen=True)
class MissedTrip:
    celebrity: str
    date: date
    location: str | None  # None when the pair produced no candidates at all


def load_ground_truth(path: str | Path) -> list[tuple[str, date, str]]:
    """Ground-truth CSV with header ``celebrity,date,location``."""
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = {"celebrity", "date", "location"} - set(reader.fieldnames or ())
        if missing:
            raise CorpusError(f"ground truth file lacks columns {sorted(missing)}")
        for lineno, row in enumerate(reader, 2):
            try:
                rows.append((row["celebrity"].strip(), date.fromisoformat(row["date"].strip()), row["location"].strip()))
            except ValueError:
                raise CorpusError(f"ground truth line {lineno}: bad date {row['date']!r}") from None
    return rows


def write_ground_truth(rows: Iterable[tuple[str, date, str]], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["celebrity", "date", "location"])
        for c, d, loc in rows:
            w.writerow([c, d.isoformat(), loc])


def group_ground_truth(rows: Iterable[tuple[str, date, str]]) -> dict[tuple[str, date], list[str]]:
    groups: dict[tuple[str, date], list[str]] = {}
    for c, d, loc in rows:
        groups.setdefault((c, d), [])
        if loc and loc not in groups[(c, d)]:
            groups[(c, d)].append(loc)
    return groups


def build_trip_instances(corpus: Corpus, ground_truth: Iterable[tuple[str, date, str]],
                         mentions: Mapping[str, Sequence[LocationMention]], index: GazetteerIndex,
                         containment: str = "article") -> tuple[list[TripInstance], list[MissedTrip]]:
    """Label every candidate location of every ground-truth (celebrity, date) pair.

    Ground-truth names are mapped to gazetteer canonicals when the gazetteer
    knows them.  Visited places that never surface as candidates are returned
    as missed trips and logged.
    """
    instances: list[TripInstance] = []
    missed: list[MissedTrip] = []
    for (celeb, d), visited in group_ground_truth(ground_truth).items():
        truth = set()
        for loc in visited:
            entry = index.lookup(loc)
            truth.add(entry.canonical if entry is not None else loc)
        pool = select_articles(corpus, celeb, d)
        cands = candidate_locations(pool, mentions, index, containment)
        if not cands:
            log.warning("no candidate locations for (%s, %s)", celeb, d)
            missed.append(MissedTrip(celeb, d, None))
            continue
        for loc, ids in cands.items():
            instances.append(TripInstance(celeb, loc, d, tuple(ids), int(loc in truth)))
        for loc in sorted(truth - set(cands)):
            log.warning("missed trip: %s visited %s on %s but it is not a candidate", celeb, loc, d)
            missed.append(MissedTrip(celeb, d, loc))
    return instances, missed


INSTANCE_FIELDS = ("celebrity", "location", "date", "article_ids", "label")


def write_instances(instances: Iterable[TripInstance], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(INSTANCE_FIELDS)
        for inst in instances:
            label = "" if inst.label is None else ("positive" if inst.label else "negative")
            w.writerow([inst.celebrity, inst.location, inst.date.isoformat(), "|".join(inst.article_ids), label])


def load_instances(path: str | Path) -> list[TripInstance]:
    """Trip-dataset CSV (celebrity, location, date, ``|``-joined article ids, label)."""
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.DictReader(fh), 2):
            label = row.get("label", "").strip().lower()
            value = {"positive": 1, "1": 1, "negative": 0, "0": 0, "": None}.get(label, "bad")
            if value == "bad":
                raise CorpusError(f"instance line {lineno}: bad label {row['label']!r}")
            out.append(TripInstance(row["celebrity"], row["location"], date.fromisoformat(row["date"]),
                                    tuple(a for a in row["article_ids"].split("|") if a), value))
    return out


def group_instances(instances: Iterable[TripInstance]) -> dict[tuple[str, date], list[TripInstance]]:
    groups: dict[tuple[str, date], list[TripInstance]] = {}
    for inst in instances:
        groups.setdefault((inst.celebrity, inst.date), []).append(inst)
    return groups
