"""Gazetteer-backed location extraction with containment resolution."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from celetrip.text import normalize_token, sentence_tokens

FEATURE_CLASSES = ("city", "region", "country", "other")
# higher wins when two entries share a surface form
_SPECIFICITY = {"city": 3, "region": 2, "country": 1, "other": 0}


class GazetteerError(ValueError):
    pass


@dataclass(frozen=True)
class GazetteerEntry:
    id: str
    canonical: str
    aliases: tuple[str, ...] = ()
    admin_chain: tuple[str, ...] = ()  # ancestors, outermost first
    feature_class: str = "other"

    def __post_init__(self):
        if not self.canonical.strip():
            raise GazetteerError(f"entry {self.id!r} has an empty canonical name")
        if self.feature_class not in _SPECIFICITY:
            raise GazetteerError(f"entry {self.id!r}: unknown feature class {self.feature_class!r}")


@dataclass(frozen=True)
class LocationMention:
    surface: str
    canonical: str
    gazetteer_id: str
    sentence_index: int
    token_span: tuple[int, int]


def surface_key(surface: str) -> tuple[str, ...]:
    return tuple(normalize_token(t) for sent in sentence_tokens(surface) for t in sent)


@dataclass
class GazetteerIndex:
    """Case-insensitive longest-match lookup over canonical names and aliases."""

    entries: dict[str, GazetteerEntry]
    _surfaces: dict[tuple[str, ...], list[str]] = field(default_factory=dict, repr=False)
    _by_canonical: dict[str, list[str]] = field(default_factory=dict, repr=False)
    max_len: int = 0

    @classmethod
    def from_entries(cls, entries: Iterable[GazetteerEntry]) -> "GazetteerIndex":
        table: dict[str, GazetteerEntry] = {}
        for e in entries:
            if e.id in table:
                raise GazetteerError(f"duplicate gazetteer id {e.id!r}")
            table[e.id] = e
        index = cls(entries=table)
        for e in table.values():
            index._by_canonical.setdefault(e.canonical, []).append(e.id)
            for surface in (e.canonical, *e.aliases):
                key = surface_key(surface)
                if not key:
                    continue
                ids = index._surfaces.setdefault(key, [])
                if e.id not in ids:
                    ids.append(e.id)
                index.max_len = max(index.max_len, len(key))
        for ids in index._surfaces.values():
            ids.sort(key=lambda i: (-_SPECIFICITY[table[i].feature_class], i))
        index._check_acyclic()
        return index

    def _check_acyclic(self) -> None:
        parents = {
            eid: [pid for name in e.admin_chain for pid in self._by_canonical.get(name, [])]
            for eid, e in self.entries.items()
        }
        state: dict[str, int] = {}  # 1 = on stack, 2 = done
        for root in sorted(parents):
            if state.get(root):
                continue
            stack = [(root, iter(parents[root]))]
            path = [root]
            state[root] = 1
            while stack:
                node, it = stack[-1]
                nxt = next(it, None)
                if nxt is None:
                    state[node] = 2
                    stack.pop()
                    path.pop()
                    continue
                if state.get(nxt) == 1:
                    cycle = path[path.index(nxt):] + [nxt]
                    raise GazetteerError("cyclic admin_chain: " + " > ".join(cycle))
                if not state.get(nxt):
                    state[nxt] = 1
                    stack.append((nxt, iter(parents[nxt])))
                    path.append(nxt)

    def lookup(self, surface: str) -> GazetteerEntry | None:
        ids = self._surfaces.get(surface_key(surface))
        return self.entries[ids[0]] if ids else None

    def lookup_key(self, key: tuple[str, ...]) -> GazetteerEntry | None:
        ids = self._surfaces.get(key)
        return self.entries[ids[0]] if ids else None

    def ancestors(self, canonical: str) -> set[str]:
        out: set[str] = set()
        for eid in self._by_canonical.get(canonical, []):
            out.update(self.entries[eid].admin_chain)
        return out

    def surfaces_of(self, canonical: str) -> list[str]:
        out: list[str] = []
        for eid in self._by_canonical.get(canonical, []):
            e = self.entries[eid]
            out.extend([e.canonical, *e.aliases])
        return out

    def __len__(self) -> int:
        return len(self.entries)


def parse_gazetteer_rows(rows: Iterable[tuple[int, Sequence[str]]]) -> list[GazetteerEntry]:
    entries = []
    for lineno, row in rows:
        if len(row) != 5:
            raise GazetteerError(f"line {lineno}: expected 5 tab-separated columns, got {len(row)}")
        gid, canonical, aliases, chain, fclass = (c.strip() for c in row)
        entries.append(GazetteerEntry(
            id=gid,
            canonical=canonical,
            aliases=tuple(a.strip() for a in aliases.split("|") if a.strip()),
            admin_chain=tuple(a.strip() for a in chain.split(">") if a.strip()),
            feature_class=fclass or "other",
        ))
    return entries


def build_gazetteer_index(path: str | Path) -> GazetteerIndex:
    """Load a gazetteer TSV: ``id canonical aliases(|) admin_chain(>) feature_class``.

    Blank lines, ``#`` comments and a header row starting with ``id`` are skipped.
    """
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh, delimiter="\t", quoting=csv.QUOTE_NONE), 1):
            if not row or not "".join(row).strip() or row[0].startswith("#"):
                continue
            if lineno == 1 and row[0].strip().lower() == "id":
                continue
            rows.append((lineno, row))
    return GazetteerIndex.from_entries(parse_gazetteer_rows(rows))


def write_gazetteer(entries: Iterable[GazetteerEntry], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("id\tcanonical\taliases\tadmin_chain\tfeature_class\n")
        for e in entries:
            fh.write("\t".join([e.id, e.canonical, "|".join(e.aliases), ">".join(e.admin_chain), e.feature_class]) + "\n")


def match_sentence(tokens: Sequence[str], index: GazetteerIndex, sentence_index: int = 0) -> list[LocationMention]:
    norm = [normalize_token(t) for t in tokens]
    out = []
    i, n = 0, len(norm)
    while i < n:
        for length in range(min(index.max_len, n - i), 0, -1):
            entry = index.lookup_key(tuple(norm[i:i + length]))
            if entry is not None:
                span = list(tokens[i:i + length])
                stripped = normalize_token(span[-1])
                span[-1] = span[-1][:len(stripped)]
                surface = " ".join(span)
                out.append(LocationMention(surface, entry.canonical, entry.id, sentence_index, (i, i + length)))
                i += length
                break
        else:
            i += 1
    return out


def match_locations(article, index: GazetteerIndex) -> list[LocationMention]:
    """Leftmost-longest gazetteer scan over each sentence of ``article``.

    ``article`` needs a ``raw_sentences`` attribute (list of token lists).
    Possessive suffixes are stripped before lookup, so ``North Korea's``
    resolves to ``North Korea``.
    """
    out: list[LocationMention] = []
    for s_idx, tokens in enumerate(article.raw_sentences):
        out.extend(match_sentence(tokens, index, s_idx))
    return out


def resolve_containment(mentions: Sequence[LocationMention], index: GazetteerIndex) -> list[str]:
    """Drop any location that is an administrative ancestor of another co-occurring one.

    Returns the surviving canonical names, deduplicated, in first-mention order.
    """
    names = list(dict.fromkeys(m.canonical for m in mentions))
    covered: set[str] = set()
    for name in names:
        covered.update(a for a in index.ancestors(name) if a != name)
    return [n for n in names if n not in covered]
