"""Turn (celebrity, date) candidate groups into model-ready samples."""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from datetime import date, timedelta
from typing import Mapping, Sequence

import numpy as np

from celetrip.corpus import Corpus, TripInstance, candidate_locations, group_instances, select_articles
from celetrip.extract_geo import GazetteerIndex, LocationMention
from celetrip.features import TfidfModel, WordVectors, sentence_vector
from celetrip.graphs import (EntitySubgraph, GraphError, KnowledgeBase, TripGraph, WordArticleGraph,
                             build_entity_subgraph, build_trip_graph, build_word_article_graph, link_entity)
from celetrip.text import name_stems, sentence_tokens

log = logging.getLogger(__name__)


@dataclass
class EntityInput:
    surface: str
    h_init: np.ndarray
    subgraph: EntitySubgraph | None


@dataclass
class EventInput:
    surface: str
    h_init: np.ndarray
    sentence_vectors: np.ndarray  # s x word dim, possibly s = 0
    counts: np.ndarray  # 2Q+1 daily article counts, day d at the centre


@dataclass
class TripSample:
    celebrity: str
    date: date
    locations: list[str]
    location_graphs: list[WordArticleGraph]
    entities: list[EntityInput]
    events: list[EventInput]
    trip_graph: TripGraph
    article_ids: dict[str, list[str]] = field(default_factory=dict)

    @property
    def key(self) -> tuple[str, date]:
        return self.celebrity, self.date

    @property
    def labels(self) -> np.ndarray | None:
        return self.trip_graph.labels


def _surface_pattern(surface: str) -> re.Pattern | None:
    tokens = [t for s in sentence_tokens(surface) for t in s]
    if not tokens:
        return None
    return re.compile(r"(?<!\w)" + r"\s+".join(map(re.escape, tokens)) + r"(?!\w)", re.IGNORECASE)


class FeatureContext:
    """Everything needed to build samples: corpus, embeddings, tf-idf, optional KB and gazetteer."""

    def __init__(self, corpus: Corpus, wv: WordVectors, tfidf: TfidfModel, kb: KnowledgeBase | None = None,
                 index: GazetteerIndex | None = None, window: int = 15, q: int = 7):
        self.corpus, self.wv, self.tfidf, self.kb, self.index = corpus, wv, tfidf, kb, index
        self.window, self.q = window, q
        self._daily: dict[str, dict[date, int]] = {}
        self._patterns: dict[str, re.Pattern | None] = {}
        self._published: dict[date, list] = {}
        for art in corpus:
            if art.publish_date is not None:
                self._published.setdefault(art.publish_date, []).append(art)

    def pattern(self, surface: str) -> re.Pattern | None:
        key = surface.lower()
        if key not in self._patterns:
            self._patterns[key] = _surface_pattern(surface)
        return self._patterns[key]

    def name_vector(self, surface: str) -> np.ndarray:
        stems = name_stems(surface)
        return sentence_vector(stems, self.wv)

    def daily_counts(self, surface: str, d: date) -> np.ndarray:
        """Articles published on each day of [d - Q, d + Q] whose text contains ``surface``."""
        key = surface.lower()
        if key not in self._daily:
            pat = self.pattern(surface)
            table: dict[date, int] = {}
            if pat is not None:
                for day, arts in self._published.items():
                    n = sum(1 for a in arts if pat.search(a.text))
                    if n:
                        table[day] = n
            self._daily[key] = table
        table = self._daily[key]
        return np.array([table.get(d + timedelta(days=o), 0) for o in range(-self.q, self.q + 1)],
                        dtype=np.float64)

    def event_sentences(self, surface: str, d: date) -> np.ndarray:
        """Sentence vectors of every sentence naming the event in articles published on ``d``."""
        pat = self.pattern(surface)
        rows = []
        if pat is not None:
            for art in self._published.get(d, ()):
                if not pat.search(art.text):
                    continue
                for raw, stems in zip(art.raw_sentences, art.sentences):
                    if pat.search(" ".join(raw)):
                        rows.append(sentence_vector(stems, self.wv))
        return np.vstack(rows) if rows else np.zeros((0, self.wv.dim))

    def entity_input(self, surface: str) -> EntityInput:
        sub = None
        if self.kb is not None:
            eid = link_entity(surface, self.kb)
            if eid is not None:
                sub = build_entity_subgraph(eid, self.kb)
        return EntityInput(surface, self.name_vector(surface), sub)

    def event_input(self, surface: str, d: date) -> EventInput:
        return EventInput(surface, self.name_vector(surface), self.event_sentences(surface, d),
                          self.daily_counts(surface, d))

    def location_surfaces(self, loc: str) -> list[str]:
        return self.index.surfaces_of(loc) if self.index is not None else []


def build_sample(ctx: FeatureContext, celebrity: str, d: date, location_articles: Mapping[str, Sequence[str]],
                 labels: Mapping[str, int] | None = None) -> TripSample | None:
    """Assemble graphs and node inputs for one (celebrity, date) pair.

    Candidates whose Word-Article graph cannot be built (location or
    celebrity stems missing) are dropped with a log entry; ``None`` when
    nothing is left.
    """
    locs, graphs, arts_by_loc = [], [], {}
    for loc, ids in location_articles.items():
        arts = [ctx.corpus[i] for i in ids]
        try:
            g = build_word_article_graph(arts, loc, celebrity, ctx.wv, ctx.tfidf, ctx.window,
                                         ctx.location_surfaces(loc))
        except GraphError as exc:
            log.warning("dropping candidate %s for (%s, %s): %s", loc, celebrity, d, exc)
            continue
        locs.append(loc)
        graphs.append(g)
        arts_by_loc[loc] = arts
    if not locs:
        return None
    lab = None
    if labels is not None:
        lab = [labels[loc] for loc in locs]
        if any(v is None for v in lab):
            lab = None
    tg = build_trip_graph(locs, arts_by_loc, lab)
    entities = [ctx.entity_input(s) for s in tg.entities]
    events = [ctx.event_input(s, d) for s in tg.events]
    return TripSample(celebrity, d, locs, graphs, entities, events, tg,
                      {loc: [a.id for a in arts_by_loc[loc]] for loc in locs})


def samples_from_instances(ctx: FeatureContext, instances: Sequence[TripInstance]) -> list[TripSample]:
    out = []
    for (celeb, d), group in group_instances(instances).items():
        sample = build_sample(ctx, celeb, d, {i.location: list(i.article_ids) for i in group},
                              {i.location: i.label for i in group})
        if sample is not None:
            out.append(sample)
    return out


def candidates_for(ctx: FeatureContext, celebrity: str, d: date,
                   mentions: Mapping[str, Sequence[LocationMention]], containment: str = "article"
                   ) -> dict[str, list[str]]:
    if ctx.index is None:
        raise ValueError("a gazetteer is required to find candidate locations")
    pool = select_articles(ctx.corpus, celebrity, d)
    return candidate_locations(pool, mentions, ctx.index, containment)
