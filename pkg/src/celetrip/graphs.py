"""Word-Article graphs, knowledge-base entity sub-graphs and Trip Graphs."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from celetrip.features import TfidfModel, WordVectors, load_word_vectors
from celetrip.text import name_stems, normalize_token, sentence_tokens

log = logging.getLogger(__name__)

ENTITY_NODE_TYPES = ("PERSON", "NORP", "FACILITY", "ORGANIZATION")
EVENT_NODE_TYPES = ("EVENT",)


class GraphError(ValueError):
    pass


@dataclass
class WordArticleGraph:
    word_nodes: list[str]
    article_nodes: list[str]
    adjacency: np.ndarray  # (iota+tau) square, 0/1, symmetric, unit diagonal
    x_words: np.ndarray
    x_articles: np.ndarray
    lw_idx: list[int]
    cw_idx: list[int]

    @property
    def n_words(self) -> int:
        return len(self.word_nodes)

    @property
    def n_articles(self) -> int:
        return len(self.article_nodes)

    @property
    def n_nodes(self) -> int:
        return self.adjacency.shape[0]

    def word_edges(self) -> set[tuple[str, str]]:
        out = set()
        iota = self.n_words
        rows, cols = np.nonzero(np.triu(self.adjacency[:iota, :iota], 1))
        for i, j in zip(rows, cols):
            out.add(tuple(sorted((self.word_nodes[i], self.word_nodes[j]))))
        return out


def build_word_article_graph(articles: Sequence, loc: str, celebrity: str, wv: WordVectors,
                             tfidf: TfidfModel, window: int = 15,
                             loc_surfaces: Sequence[str] = ()) -> WordArticleGraph:
    """Build the Word-Article graph of one candidate location.

    Word nodes are unique stems in first-occurrence order.  Two stems are
    linked when they fall inside one run of ``window`` consecutive stems of
    a sentence (positions at most ``window - 1`` apart); an article is linked
    to every stem it contains; every node has a self-loop.
    ``loc_surfaces`` adds alias spellings whose stems also count as location
    word nodes.
    """
    if not articles:
        raise GraphError(f"no articles for location {loc!r}")
    words: dict[str, int] = {}
    for art in articles:
        for sent in art.sentences:
            for w in sent:
                words.setdefault(w, len(words))
    iota, tau = len(words), len(articles)
    adj = np.eye(iota + tau)
    for a_idx, art in enumerate(articles):
        col = iota + a_idx
        for sent in art.sentences:
            ids = [words[w] for w in sent]
            for i, wi in enumerate(ids):
                adj[wi, col] = adj[col, wi] = 1.0
                for wj in ids[i + 1:i + window]:
                    adj[wi, wj] = adj[wj, wi] = 1.0

    def indices(stems: Sequence[str]) -> list[int]:
        return sorted({words[s] for s in stems if s in words})

    lw = indices([s for name in (loc, *loc_surfaces) for s in name_stems(name)])
    cw = indices(name_stems(celebrity))
    if not lw:
        raise GraphError(f"location {loc!r} has no word node in its articles")
    if not cw:
        raise GraphError(f"celebrity {celebrity!r} has no word node in the articles of {loc!r}")
    word_list = list(words)
    x_w = wv.lookup(word_list)
    x_a = np.vstack([tfidf.transform([w for s in art.sentences for w in s]) for art in articles])
    return WordArticleGraph(word_list, [a.id for a in articles], adj, x_w, x_a, lw, cw)


# ---------------------------------------------------------------- knowledge base

def normalize_label(surface: str) -> str:
    """Lowercase, strip possessives, collapse whitespace: ``"G7's"`` -> ``"g7"``."""
    return " ".join(normalize_token(t) for s in sentence_tokens(surface) for t in s)


@dataclass
class KnowledgeBase:
    triples: list[tuple[str, str, str]]
    entity_vectors: WordVectors
    relation_vectors: WordVectors
    labels: dict[str, str] = field(default_factory=dict)  # normalised label -> entity id

    def __post_init__(self):
        if self.entity_vectors.dim != self.relation_vectors.dim and len(self.relation_vectors):
            raise GraphError("entity and relation embeddings differ in dimension")
        self._incident: dict[str, list[tuple[str, str, str]]] = {}
        for t in self.triples:
            self._incident.setdefault(t[0], []).append(t)
            if t[2] != t[0]:
                self._incident.setdefault(t[2], []).append(t)
        if not self.labels:
            ids = set(self.entity_vectors.vocabulary) | set(self._incident)
            self.labels = {normalize_label(i): i for i in sorted(ids)}

    @property
    def dim(self) -> int:
        return self.entity_vectors.dim

    def incident(self, entity_id: str) -> list[tuple[str, str, str]]:
        return list(self._incident.get(entity_id, ()))


def load_triples(path: str | Path) -> list[tuple[str, str, str]]:
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh, delimiter="\t", quoting=csv.QUOTE_NONE), 1):
            if not row or row[0].startswith("#"):
                continue
            if len(row) != 3:
                raise GraphError(f"triples line {lineno}: expected head<TAB>relation<TAB>tail")
            out.append((row[0], row[1], row[2]))
    return out


def load_kb(triples_path, entity_path, relation_path, labels_path=None) -> KnowledgeBase:
    """Load a KB from triples TSV, entity/relation vectors and optional ``id<TAB>label`` file.

    Without a label file every entity id doubles as its own label.
    """
    labels = {}
    if labels_path:
        with open(labels_path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                parts = line.rstrip("\n").split("\t")
                if len(parts) != 2:
                    raise GraphError(f"labels line {lineno}: expected id<TAB>label")
                labels[normalize_label(parts[1])] = parts[0]
    return KnowledgeBase(load_triples(triples_path), load_word_vectors(entity_path),
                         load_word_vectors(relation_path), labels)


def write_kb(kb: KnowledgeBase, triples_path, entity_path, relation_path, labels_path=None,
             id_labels: Mapping[str, str] | None = None) -> None:
    with open(triples_path, "w", encoding="utf-8") as fh:
        for h, r, t in kb.triples:
            fh.write(f"{h}\t{r}\t{t}\n")
    kb.entity_vectors.save(entity_path)
    kb.relation_vectors.save(relation_path)
    if labels_path:
        with open(labels_path, "w", encoding="utf-8") as fh:
            for eid, label in (id_labels or {v: k for k, v in kb.labels.items()}).items():
                fh.write(f"{eid}\t{label}\n")


def link_entity(surface: str, kb: KnowledgeBase) -> str | None:
    """Strict match of the normalised surface against KB labels; no fuzzy fallback."""
    return kb.labels.get(normalize_label(surface))


@dataclass
class EntitySubgraph:
    center: str
    nodes: list[str]
    edges: list[tuple[str, str, str]]
    node_init: np.ndarray  # len(nodes) x kb dim
    relation_init: dict[str, np.ndarray]

    def neighbours(self) -> list[tuple[int, str]]:
        """(node index, relation) for every edge incident on the centre."""
        pos = {n: i for i, n in enumerate(self.nodes)}
        out = []
        for h, r, t in self.edges:
            other = t if h == self.center else h
            out.append((pos[other], r))
        return out


def build_entity_subgraph(entity_id: str, kb: KnowledgeBase) -> EntitySubgraph:
    """1-hop neighbourhood: every triple with the entity as head or tail."""
    edges = kb.incident(entity_id)
    nodes = [entity_id]
    for h, _, t in edges:
        for n in (h, t):
            if n not in nodes:
                nodes.append(n)
    node_init = kb.entity_vectors.lookup(nodes)
    rels = {r: kb.relation_vectors[r].copy() for _, r, _ in edges}
    return EntitySubgraph(entity_id, nodes, edges, node_init, rels)


# ---------------------------------------------------------------- trip graph

@dataclass
class TripGraph:
    locations: list[str]
    entities: list[str]  # display surfaces, one per normalised surface
    events: list[str]
    adjacency: np.ndarray  # (k+n+m) square with self-loops; rows: locations, entities, events
    labels: np.ndarray | None = None

    @property
    def k(self) -> int:
        return len(self.locations)

    @property
    def n(self) -> int:
        return len(self.entities)

    @property
    def m(self) -> int:
        return len(self.events)


def collect_mentions(articles: Sequence, types: Sequence[str]) -> list[str]:
    """Distinct mention surfaces of ``types`` (by normalised form), first-seen order."""
    seen: dict[str, str] = {}
    for art in articles:
        for m in art.mentions:
            if m.type in types:
                seen.setdefault(normalize_label(m.surface), m.surface)
    return list(seen.values())


def build_trip_graph(locations: Sequence[str], location_articles: Mapping[str, Sequence],
                     labels: Sequence[int] | None = None) -> TripGraph:
    """Link each candidate location to the entities and events found in its articles.

    Entity nodes come from PERSON, NORP, FACILITY and ORGANIZATION mentions,
    event nodes from EVENT mentions.  Locations are never linked directly.
    """
    if not locations:
        raise GraphError("a trip graph needs at least one candidate location")
    per_loc_ent = {loc: collect_mentions(location_articles[loc], ENTITY_NODE_TYPES) for loc in locations}
    per_loc_eve = {loc: collect_mentions(location_articles[loc], EVENT_NODE_TYPES) for loc in locations}
    entities = _ordered_union(per_loc_ent[loc] for loc in locations)
    events = _ordered_union(per_loc_eve[loc] for loc in locations)
    k, n, m = len(locations), len(entities), len(events)
    ent_pos = {normalize_label(e): k + i for i, e in enumerate(entities)}
    eve_pos = {normalize_label(e): k + n + i for i, e in enumerate(events)}
    adj = np.eye(k + n + m)
    for li, loc in enumerate(locations):
        for e in per_loc_ent[loc]:
            j = ent_pos[normalize_label(e)]
            adj[li, j] = adj[j, li] = 1.0
        for e in per_loc_eve[loc]:
            j = eve_pos[normalize_label(e)]
            adj[li, j] = adj[j, li] = 1.0
    lab = None if labels is None else np.asarray(labels, dtype=np.float64)
    return TripGraph(list(locations), entities, events, adj, lab)


def _ordered_union(lists) -> list[str]:
    seen: dict[str, str] = {}
    for lst in lists:
        for s in lst:
            seen.setdefault(normalize_label(s), s)
    return list(seen.values())
